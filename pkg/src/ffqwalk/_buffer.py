import numpy as np

# room kept free on both sides of the live window when (re)centring
_PAD = 1024


class DoubleBuffer:
    """Double-buffered lattice storage with a sliding live window.

    Buffer index = site + ``offset``. Subclasses supply ``_kernel_advance``.
    """

    rows = 1

    def __init__(self, values: np.ndarray, window_lo: int, step_count: int,
                 truncated_mass: float, epsilon_trunc: float):
        values = np.asarray(values, dtype=np.float64)
        width = values.shape[1]
        cap = width + 2 * _PAD
        self.buf = np.zeros((2, self.rows, cap))
        self.offset = _PAD - window_lo
        self.buf[0, :, _PAD:_PAD + width] = values
        self.cur = 0
        self.lo = _PAD
        self.hi = _PAD + width - 1
        self.stale_lo, self.stale_hi = self.lo, self.lo - 1
        self.t = int(step_count)
        self.truncated_mass = float(truncated_mass)
        self.epsilon_trunc = float(epsilon_trunc)

    @property
    def window_lo(self) -> int:
        return self.lo - self.offset

    @property
    def window_hi(self) -> int:
        return self.hi - self.offset

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    def live(self) -> np.ndarray:
        """Copy of the live window, shape (rows, width)."""
        return self.buf[self.cur, :, self.lo:self.hi + 1].copy()

    def _recentre(self):
        width = self.width
        cap = max(self.buf.shape[2], width + 2 * _PAD)
        new = np.zeros((2, self.rows, cap))
        start = (cap - width) // 2
        new[0, :, start:start + width] = self.buf[self.cur, :, self.lo:self.hi + 1]
        self.offset += start - self.lo
        self.buf = new
        self.cur = 0
        self.lo, self.hi = start, start + width - 1
        self.stale_lo, self.stale_hi = self.lo, self.lo - 1

    def advance(self, steps: int):
        steps = int(steps)
        while steps > 0:
            room = min(self.lo - 1, self.buf.shape[2] - 2 - self.hi)
            if room < min(steps, 64):
                self._recentre()
                continue
            n = min(steps, room)
            self._kernel_advance(n)
            self.t += n
            steps -= n
            self._check(n)

    def _kernel_advance(self, n: int):  # pragma: no cover - abstract
        raise NotImplementedError

    def _check(self, n: int):
        pass
