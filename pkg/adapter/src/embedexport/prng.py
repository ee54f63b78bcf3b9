"""SplitMix64, as pinned in the consumer's FORMAT.md.

Independent re-implementation: byte-identical synthetic output depends on
this matching the documented constants and float mapping exactly.
Known answers: seed 0 -> 0xE220A8397B1DCDAF; seed 1234567 ->
6457827717110365317, 3203168211198807973, 9817491932198370423.
"""

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


class SplitMix64:
    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MUL1) & _MASK
        z = ((z ^ (z >> 27)) * _MUL2) & _MASK
        return z ^ (z >> 31)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * (2.0 ** -53)
