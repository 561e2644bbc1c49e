"""The fast, oblivious, variable-step convolution evaluator.

The triangle {0 <= tau <= t <= T} is tessellated into patches growing
geometrically with distance from the diagonal ("mosaic").  Each distance
class (level) owns one hyperbolic contour and a bank of 2K+1 scalar ODEs
y' = lambda_k y + gbar advanced by exponential Euler.  Per step, every
bank is advanced; evaluation selects frozen bank snapshots whose distances
fit the level's approximation interval, bridges the gaps between them with
single-subinterval direct steps, and adds a direct step for the diagonal.

Bookkeeping follows the four-record scheme Y / YM / YA / YT:

* ``Y``  live bank, advanced to the current time each step;
* ``YM`` snapshot refreshed when the grid crosses a sub-row line;
* ``YA`` snapshot of a completed patch (taken at patch-top crossings);
* ``YT`` the snapshot actually used for evaluation, chosen by distance
  guards and invalidated (explicit flag) when it no longer fits.

Within one step the copy refresh and selection run against the records as
of the previous grid point, before the banks advance; that way the last
grid point below a boundary is captured before a restart discards the live
segment, and the whole selection is independent of the new g-sample, which
is what implicit problems need.  Patch geometry is kept as integer indices
(patch index, sub-row index) and turned into times by single float
products, so the many time comparisons are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend as bk
from .contour import ContourConstants, build_contour, level_bounds, plan_level
from .errors import (
    ConfigurationError,
    HorizonExceededError,
    OrderingError,
    StepScaleError,
)
from .kernels import SectorialTransform

__all__ = [
    "Counters",
    "decompose",
    "ode_advance",
    "Segment",
    "StepPlan",
    "ConvolutionEngine",
    "convolve_on_grid",
]

_REL_SLACK = 1e-12


@dataclass
class Counters:
    """Work and memory tallies; all fields are monotone during a run."""

    F_evaluations: int = 0
    ode_advances: int = 0
    direct_steps: int = 0
    stored_vectors_peak: int = 0
    g_reads: int = 0
    g_reads_step_max: int = 0
    oob_inversions: int = 0

    def as_dict(self) -> dict:
        return {
            "F_evaluations": self.F_evaluations,
            "ode_advances": self.ode_advances,
            "direct_steps": self.direct_steps,
            "stored_vectors_peak": self.stored_vectors_peak,
            "g_reads": self.g_reads,
            "g_reads_step_max": self.g_reads_step_max,
            "oob_inversions": self.oob_inversions,
        }


def decompose(t_n: float, h_min: float, B: int) -> tuple[int, list[int]]:
    """Represent ceil(t_n/h_min) = 2 + sum b_l B^(l-1) with digits in {1..B}.

    This is bijective base-B numeration of ceil(t_n/h_min) - 2, which is
    unique, so the digit count L is minimal.  Returns (0, []) while
    ceil(t_n/h_min) <= 2 (all-direct regime).
    """
    if h_min <= 0:
        raise ConfigurationError(f"h_min must be positive, got {h_min}")
    if B < 2:
        raise ConfigurationError(f"basis B must be >= 2, got {B}")
    q = t_n / h_min
    qr = round(q)
    if abs(q - qr) <= 1e-9 * max(1.0, abs(q)):
        q = qr
    n = math.ceil(q) - 2
    digits: list[int] = []
    while n > 0:
        r = n % B
        if r == 0:
            r = B
        digits.append(r)
        n = (n - r) // B
    return len(digits), digits


def ode_advance(y: np.ndarray, lam: np.ndarray, dt: float,
                g_prev, g_n) -> np.ndarray:
    """Exponential-Euler update of one ODE bank over [t, t+dt].

    Exact for the linear interpolant of g:
    y <- e^z y + dt (phi1(z) g_prev + phi2(z) (g_n - g_prev)), z = dt*lam,
    which is the expanded form of
    y + ((e^z - 1)/lam)(lam y + g_prev + (g_n - g_prev)/(dt lam))
      + (g_prev - g_n)/lam.
    """
    if dt <= 0:
        raise OrderingError(f"ode_advance requires dt > 0, got {dt}")
    y = np.array(y, dtype=np.complex128, copy=True)
    lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    scalar = y.ndim == 1
    if scalar:
        y = y[:, None]
    gp = np.atleast_1d(np.asarray(g_prev, dtype=np.complex128))
    gn = np.atleast_1d(np.asarray(g_n, dtype=np.complex128))
    bk.advance_banks(y[None], lam[None], dt, gp, gn)
    return y[:, 0] if scalar else y


@dataclass(frozen=True)
class Segment:
    """One piece of the splitting of [0, t_n]: an ODE patch contribution,
    a gap direct step, or the diagonal direct step."""

    kind: str  # "ode" | "gap" | "diag"
    t_lo: float
    t_hi: float
    level: int = 0  # 1-based mosaic level for "ode"


@dataclass
class StepPlan:
    """Introspectable record of how one evaluation was assembled."""

    t: float
    ito: int
    selected: list[int]
    segments: list[Segment] = field(default_factory=list)


class _Records:
    """Column arrays for one family of per-level structures (Y, YM, YA, YT)."""

    __slots__ = ("data", "tini", "tcur", "b", "pidx", "gini", "gcur")

    def __init__(self, L: int, Kd: int, m: int, g0: np.ndarray):
        self.data = np.zeros((L, Kd, m), dtype=np.complex128)
        self.tini = np.zeros(L)
        self.tcur = np.zeros(L)
        self.b = np.ones(L, dtype=np.int64)
        self.pidx = np.zeros(L, dtype=np.int64)
        self.gini = np.tile(g0, (L, 1)).astype(np.complex128)
        self.gcur = self.gini.copy()

    def copy_from(self, other: "_Records", l: int) -> None:
        self.data[l] = other.data[l]
        self.tini[l] = other.tini[l]
        self.tcur[l] = other.tcur[l]
        self.b[l] = other.b[l]
        self.pidx[l] = other.pidx[l]
        self.gini[l] = other.gini[l]
        self.gcur[l] = other.gcur[l]


class ConvolutionEngine:
    """Evaluates u(t_n) = integral_0^{t_n} f(t_n - tau) gbar(tau) dtau on a
    strictly increasing grid fed one point at a time.

    The engine is oblivious: after a step it retains only the ODE bank
    states, two g-samples per level and the last grid samples.  Use either

    * ``evaluate(t, g_t)`` for explicit problems, or
    * ``history(t)`` then ``commit(t, g_t)`` for implicit problems, where
      the diagonal term couples to the unknown g(t); ``history`` never
      depends on g(t) and does not mutate state, so controller retries may
      call it repeatedly with different trial times.

    One engine per convolution; no concurrent mutation.
    """

    def __init__(self, transform: SectorialTransform, *, h_min: float, B: int,
                 horizon: float, constants: ContourConstants,
                 sigma: float = None, dim: int = 1, complex_g: bool = False,
                 debug: bool = False):
        if B < 2:
            raise ConfigurationError(f"basis B must be >= 2, got {B}")
        if h_min <= 0:
            raise ConfigurationError(f"h_min must be positive, got {h_min}")
        if horizon <= h_min:
            raise ConfigurationError("horizon must exceed h_min")
        self.transform = transform
        self.h_min = float(h_min)
        self.B = int(B)
        self.horizon = float(horizon)
        self.constants = constants
        self.sigma = transform.sigma if sigma is None else float(sigma)
        self.m = int(dim)
        self.debug = bool(debug)
        self._sym = bool(transform.real_symmetric) and not complex_g
        self.K = constants.K

        n_levels, _ = decompose(horizon, h_min, B)
        self.L = max(n_levels, 1) + 1
        self.counters = Counters()

        self.plans = []
        self.contours = []
        K2 = 2 * self.K + 1
        self.lam_full = np.empty((self.L, K2), dtype=np.complex128)
        self._wf1 = np.empty((self.L, K2), dtype=np.complex128)
        self._wf2 = np.empty((self.L, K2), dtype=np.complex128)
        wf = np.empty((self.L, K2), dtype=np.complex128)
        for l in range(self.L):
            plan = plan_level(l + 1, h_min, B, constants, self.sigma)
            cont = build_contour(plan, constants, transform)
            self.plans.append(plan)
            self.contours.append(cont)
            self.lam_full[l] = cont.nodes
            wf[l] = cont.weights * cont.Fvals
            self._wf1[l] = cont.weights * cont.F1vals
            self._wf2[l] = cont.weights * cont.F2vals
            self.counters.F_evaluations += cont.f_evaluations

        if self._sym:
            self.Kd = self.K + 1
            self.lam_bank = np.ascontiguousarray(self.lam_full[:, self.K:])
            self._wf_eval = np.ascontiguousarray(wf[:, self.K:])
            self._wf_eval[:, 1:] *= 2.0
        else:
            self.Kd = K2
            self.lam_bank = self.lam_full.copy()
            self._wf_eval = wf

        self.lb = np.empty(self.L)
        self.ub = np.empty(self.L)
        self.sub = np.empty(self.L)
        self.patch = np.empty(self.L)
        for l in range(self.L):
            self.lb[l], self.ub[l] = level_bounds(l + 1, h_min, B)
            self.sub[l] = float(B ** l) * h_min
            self.patch[l] = float(B ** (l + 1)) * h_min
        self._coverage = self.patch[self.L - 1]

        self.counters.stored_vectors_peak = 4 * self.L * self.Kd
        self.Y = self.M = self.A = self.T = None
        self.T_valid = None
        self._t_hist: list[float] = []
        self._g_hist: list[np.ndarray] = []
        self.last_plan: StepPlan | None = None
        self._last_sel: np.ndarray | None = None
        self._step_reads: set = set()

    # -- lifecycle -----------------------------------------------------------

    def begin(self, g0) -> None:
        """Record the sample g(0); must be called before the first step."""
        g0 = self._coerce(g0)
        self.Y = _Records(self.L, self.Kd, self.m, g0)
        self.M = _Records(self.L, self.Kd, self.m, g0)
        self.A = _Records(self.L, self.Kd, self.m, g0)
        self.T = _Records(self.L, self.Kd, self.m, g0)
        self.T_valid = np.ones(self.L, dtype=bool)
        self._t_hist = [0.0]
        self._g_hist = [g0]

    def _coerce(self, g) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(g, dtype=np.complex128))
        if arr.shape != (self.m,):
            raise ConfigurationError(f"g sample has shape {arr.shape}, expected ({self.m},)")
        return arr.copy()

    def _require_started(self):
        if self.Y is None:
            raise OrderingError("call begin(g0) before stepping the engine")

    def _check_time(self, t: float) -> None:
        self._require_started()
        if t <= self._t_hist[-1]:
            raise OrderingError(f"time {t} not beyond current time {self._t_hist[-1]}")
        if t > self._coverage:
            raise HorizonExceededError(
                f"t={t} exceeds mosaic coverage {self._coverage:.6g}; "
                f"construct the engine with a larger horizon"
            )

    # -- geometry helpers ------------------------------------------------------

    def _line(self, rec: _Records, l: int) -> float:
        # next sub-row line at-or-ahead of the record: (pidx*B + b) * B^l * h_min
        return float(rec.pidx[l] * self.B + rec.b[l]) * self.sub[l]

    def _tmax(self, rec: _Records, l: int) -> float:
        return float(rec.pidx[l] + 1) * self.patch[l]

    def _guard(self, rec: _Records, l: int, t_n: float) -> bool:
        # the stored segment's distances must fit the approximation interval
        return (t_n - rec.tcur[l] >= self.lb[l]
                and t_n - rec.tini[l] <= self.ub[l])


    def _line_coords(self, l: int, t: float, pidx_from: int) -> tuple[int, int]:
        # patch and sub-row indices whose line is the first at-or-above t;
        # a t exactly on a line keeps that line (strict comparisons)
        pidx = int(pidx_from)
        while t > float(pidx + 1) * self.patch[l]:
            pidx += 1
        b = 1
        while t > float(pidx * self.B + b) * self.sub[l]:
            b += 1
        return pidx, b

    def locate_level(self, dist: float) -> int:
        """Smallest 0-based level whose [lb, ub] contains ``dist``."""
        for l in range(self.L):
            if dist >= self.lb[l] * (1.0 - _REL_SLACK) and dist <= self.ub[l] * (1.0 + _REL_SLACK):
                return l
        raise StepScaleError(
            f"distance {dist:.6g} outside every approximation interval "
            f"[{self.lb[0]:.3g}, {self.ub[self.L - 1]:.3g}]"
        )

    def active_levels(self, t_n: float) -> int:
        """Number of mosaic levels of the decomposition of t_n (at least 1).

        Levels above this are advanced and their copies refreshed, but they
        do not participate in evaluation yet; a level's first usable
        snapshot ripens exactly when the decomposition activates it.
        """
        n_act, _ = decompose(t_n, self.h_min, self.B)
        return max(1, min(n_act, self.L))

    def _top_lines(self, t_n: float) -> tuple[int, np.ndarray]:
        """(active level count, per-level top lines of the decomposition).

        Level l (0-based) covers history up to the line
        h_min * sum_{k>l} b_k B^k; its snapshot for evaluating at t_n is
        the one frozen at the last grid point at or below that line.
        """
        nL, digits = decompose(t_n, self.h_min, self.B)
        L_act = max(1, min(nL, self.L))
        lines = np.zeros(L_act)
        acc = 0
        for j in range(min(nL, self.L) - 1, -1, -1):
            acc += digits[j] * self.B ** j
            if j < L_act:
                lines[j] = float(acc) * self.h_min
        return L_act, lines

    # -- Algorithm 1: advance and restart the scalar ODEs ----------------------

    def advance_all(self, t_n: float, g_n) -> None:
        """Advance every live bank from the previous grid time to t_n,
        restarting banks whose patch the new time leaves.

        On an exact patch-top hit the advanced bank is the completed patch
        segment; it is pushed into the snapshot pipeline before the restart
        zeroes the bank (the rare case called out in the bookkeeping: a
        point exactly on a mosaic line).  Restarts advance the patch window
        first and recompute the sub-row index within the new patch, keeping
        b in {1..B}.  Runs after ``update_copies`` for the same t_n.
        """
        self._check_time(t_n)
        g_n = self._coerce(g_n)
        t_prev = self._t_hist[-1]
        g_prev = self._g_hist[-1]
        dt = t_n - t_prev
        B = self.B

        bk.advance_banks(self.Y.data, self.lam_bank, dt, g_prev, g_n)
        self.counters.ode_advances += self.L * (2 * self.K + 1)

        for l in range(self.L):
            if t_n >= self._tmax(self.Y, l):
                if t_n == self._tmax(self.Y, l):
                    # exactly on the patch top: the advanced bank is the
                    # completed patch segment; push it into the pipeline
                    # before the restart discards it
                    self.Y.b[l] = B
                    self.Y.tcur[l] = t_n
                    self.Y.gcur[l] = g_n
                    self.A.copy_from(self.M, l)
                    self.M.copy_from(self.Y, l)
                    self.M.pidx[l], self.M.b[l] = self._line_coords(l, t_n, self.Y.pidx[l])
                # restart: move the patch window past t_n, then place b;
                # a segment ending before t_n was captured by update_copies
                self.Y.data[l] = 0.0
                while t_n >= float(self.Y.pidx[l] + 1) * self.patch[l]:
                    self.Y.pidx[l] += 1
                b = 1
                while t_n > float(self.Y.pidx[l] * B + b) * self.sub[l]:
                    b += 1
                self.Y.b[l] = b
                self.Y.tini[l] = t_n
                self.Y.tcur[l] = t_n
                self.Y.gini[l] = g_n
                self.Y.gcur[l] = g_n
            else:
                while t_n > self._line(self.Y, l):
                    self.Y.b[l] += 1
                self.Y.tcur[l] = t_n
                self.Y.gcur[l] = g_n

    # -- Algorithms 4 and 5: refresh copies, pick the evaluation set -----------

    def update_copies(self, t_n: float) -> tuple[list[int], int]:
        """Refresh YM/YA/YT for the step to t_n and build the evaluation set.

        Runs against the records as of the previous grid point (before
        ``advance_all``), so the segment ending at the last grid point
        below a crossed line is captured before a restart discards it.
        YM holds the newest pending capture, YA the one before it, and YT
        serves the level's decomposition line; selection then applies the
        distance guards and the nesting chain top-down, marking unusable
        copies invalid.  Returns (idv, ito) in the bookkeeping convention:
        idv = [ito, l1, l2, ...] with 1-based levels sorted nearest-diagonal
        first, ito the level whose interval contains the current step.
        """
        self._require_started()
        t_prev = self._t_hist[-1]
        L_act, lines = self._top_lines(t_n)
        recs = (self.T, self.M, self.A, self.Y)
        for l in range(self.L):
            # capture: once the grid is strictly past the trigger line, the
            # pre-advance live segment is final as "last grid point at or
            # below that line"; the pending pipeline shifts YM -> YA unless
            # the live endpoint brings nothing fresher, and the new trigger
            # becomes the first line at-or-above t_n
            if t_n > self._line(self.M, l):
                if self.Y.tcur[l] > self.M.tcur[l]:
                    self.A.copy_from(self.M, l)
                    self.M.copy_from(self.Y, l)
                self.M.pidx[l], self.M.b[l] = self._line_coords(l, t_n, self.Y.pidx[l])
            if l >= L_act:
                continue
            # the evaluation copy serves the level's decomposition line: the
            # snapshot frozen at the last grid point at or below it, which
            # keeps the distance to the diagonal >= lb automatically
            best_key = None
            best_code = 0
            if self.T_valid[l] and self.T.tcur[l] <= lines[l] \
                    and t_n - self.T.tini[l] <= self.ub[l]:
                best_key = (self.T.tcur[l], -self.T.tini[l])
            for code in (1, 2, 3):
                rec = recs[code]
                if rec.tcur[l] <= lines[l] and t_n - rec.tini[l] <= self.ub[l]:
                    key = (rec.tcur[l], -rec.tini[l])
                    if best_key is None or key > best_key:
                        best_key = key
                        best_code = code
            if best_key is not None and best_code != 0:
                self.T.copy_from(recs[best_code], l)
                self.T_valid[l] = True

        sel = np.zeros(self.L, dtype=bool)
        for l in range(L_act - 1, -1, -1):
            ok = (self.T_valid[l]
                  and t_n - self.T.tcur[l] >= self.lb[l]
                  and t_n - self.T.tini[l] <= self.ub[l])
            if ok and l < L_act - 1 and sel[l + 1]:
                ok = (self.T.tini[l] >= self.T.tcur[l + 1]
                      and self.T.tcur[l] > self.T.tcur[l + 1])
            if ok:
                sel[l] = True
            else:
                self.T_valid[l] = False

        ito = self.locate_level(t_n - t_prev)
        self._last_sel = sel
        idv = [ito + 1] + [l + 1 for l in range(self.L) if sel[l]]
        return idv, ito + 1

    # -- read-only selection (implicit problems, controller retries) ----------

    def _predict_selection(self, t_n: float):
        """The selection ``update_copies`` would make at t_n, no mutation.

        Source codes per level: 0 = current YT, 1 = YM, 2 = YA, 3 = the
        live record (a refresh copies Y before the banks advance, so the
        live pre-advance record can become the pick through guard #2).
        """
        L = self.L
        src = np.zeros(L, dtype=np.int8)
        valid = self.T_valid.copy()
        tini = self.T.tini.copy()
        tcur = self.T.tcur.copy()
        L_act, lines = self._top_lines(t_n)

        for l in range(min(L_act, L)):
            shifted = (t_n > self._line(self.M, l)
                       and self.Y.tcur[l] > self.M.tcur[l])
            cands = []
            if valid[l]:
                cands.append((0, self.T.tini[l], self.T.tcur[l]))
            if shifted:
                # pipeline after the capture: YM <- live, YA <- old YM
                cands.append((3, self.Y.tini[l], self.Y.tcur[l]))
                cands.append((1, self.M.tini[l], self.M.tcur[l]))
            else:
                cands.append((1, self.M.tini[l], self.M.tcur[l]))
                cands.append((2, self.A.tini[l], self.A.tcur[l]))
                cands.append((3, self.Y.tini[l], self.Y.tcur[l]))
            best_key = None
            best = None
            for code, ti, tc in cands:
                if tc <= lines[l] and t_n - ti <= self.ub[l]:
                    key = (tc, -ti)
                    if best_key is None or key > best_key:
                        best_key = key
                        best = (code, ti, tc)
            if best is not None:
                src[l], tini[l], tcur[l] = best
                valid[l] = True

        sel = np.zeros(L, dtype=bool)
        for l in range(L_act - 1, -1, -1):
            ok = valid[l] and t_n - tcur[l] >= self.lb[l] and t_n - tini[l] <= self.ub[l]
            if ok and l < L_act - 1 and sel[l + 1]:
                ok = tini[l] >= tcur[l + 1] and tcur[l] > tcur[l + 1]
            if not ok:
                valid[l] = False
            sel[l] = ok
        return src, sel, tini, tcur

    def _rec_for(self, code: int) -> _Records:
        return (self.T, self.M, self.A, self.Y)[code]

    # -- direct steps (linear-interpolation formula) ----------------------------

    def _f12(self, dist: float):
        l = self.locate_level(dist)
        if dist < self.lb[l] or dist > self.ub[l]:
            self.counters.oob_inversions += 1
        s1, s2 = bk.f12_sum(self._wf1[l], self._wf2[l], self.lam_full[l], dist)
        if self.transform.real_symmetric:
            scale = abs(s1) + abs(s2) + 1.0
            if abs(s1.imag) > 1e-12 * scale or abs(s2.imag) > 1e-12 * scale:
                raise AssertionError("f1/f2 inversion lost conjugate symmetry")
            return s1.real, s2.real
        return s1, s2

    def direct_step(self, t_n: float, t_j: float, t_j1: float, g_j, g_j1) -> np.ndarray:
        """Contribution of one subinterval [t_j, t_j1] with g interpolated
        linearly between the endpoint samples:

        f1(t_n - t_j) g_j + f2(t_n - t_j) dg - f1(t_n - t_j1) g_j1
                                             - f2(t_n - t_j1) dg,
        dg = (g_j1 - g_j)/(t_j1 - t_j); on the diagonal f1(0) = f2(0) = 0.
        """
        if not (t_j < t_j1 <= t_n):
            raise OrderingError(f"direct step needs t_j < t_j1 <= t_n, got {t_j}, {t_j1}, {t_n}")
        g_j = np.atleast_1d(np.asarray(g_j, dtype=np.complex128))
        g_j1 = np.atleast_1d(np.asarray(g_j1, dtype=np.complex128))
        slope = (g_j1 - g_j) / (t_j1 - t_j)
        f1a, f2a = self._f12(t_n - t_j)
        out = f1a * g_j + f2a * slope
        if t_j1 < t_n:
            f1b, f2b = self._f12(t_n - t_j1)
            out = out - (f1b * g_j1 + f2b * slope)
        self.counters.direct_steps += 1
        return out.real if self._sym else out

    # -- assembly (Algorithm 6) --------------------------------------------------

    def _ode_contribution(self, rec: _Records, l: int, t_n: float, out: np.ndarray) -> None:
        one = np.ones(1, dtype=bool)
        tc = np.array([rec.tcur[l]])
        if self._sym:
            bk.ode_sum_sym(rec.data[l:l + 1], self.lam_bank[l:l + 1],
                           self._wf_eval[l:l + 1], tc, t_n, one, out)
        else:
            bk.ode_sum_full(rec.data[l:l + 1], self.lam_bank[l:l + 1],
                            self._wf_eval[l:l + 1], tc, t_n, one, out)

    def _assemble(self, t_n: float, src, sel, tini, tcur) -> np.ndarray:
        t_prev = self._t_hist[-1]
        g_prev = self._g_hist[-1]
        out = np.zeros(self.m, dtype=np.float64 if self._sym else np.complex128)
        ito = self.locate_level(t_n - t_prev)
        plan = StepPlan(t=t_n, ito=ito + 1,
                        selected=[l + 1 for l in range(self.L) if sel[l]])
        reads: set[float] = set()
        order = [l for l in range(self.L) if sel[l]]
        if order:
            l0 = order[0]
            r0 = self._rec_for(src[l0])
            if t_prev > tcur[l0]:
                out += self.direct_step(t_n, tcur[l0], t_prev, r0.gcur[l0], g_prev)
                plan.segments.append(Segment("gap", tcur[l0], t_prev))
                reads.update((tcur[l0], t_prev))
            for i, l in enumerate(order):
                rec = self._rec_for(src[l])
                if tcur[l] > tini[l]:
                    self._ode_contribution(rec, l, t_n, out)
                    plan.segments.append(Segment("ode", tini[l], tcur[l], level=l + 1))
                if i + 1 < len(order):
                    l2 = order[i + 1]
                    rec2 = self._rec_for(src[l2])
                    if tini[l] > tcur[l2]:
                        out += self.direct_step(t_n, tcur[l2], tini[l],
                                                rec2.gcur[l2], rec.gini[l])
                        plan.segments.append(Segment("gap", tcur[l2], tini[l]))
                        reads.update((tcur[l2], tini[l]))
        plan.segments.sort(key=lambda s: s.t_lo)
        self.last_plan = plan
        self._step_reads = reads
        return out

    def history(self, t_n: float) -> np.ndarray:
        """integral_0^{t_prev} f(t_n - tau) gbar(tau) dtau, split into ODE
        patch contributions and gap direct steps.

        Read-only and independent of g(t_n): implicit solvers may call it
        (and ``diagonal_coeffs``) before the new sample exists, resolve the
        implicit equation, then ``commit``.
        """
        self._check_time(t_n)
        src, sel, tini, tcur = self._predict_selection(t_n)
        return self._assemble(t_n, src, sel, tini, tcur)

    def diagonal_coeffs(self, t_n: float) -> tuple[float, float, float]:
        """(f1(h), f2(h), h) for the diagonal subinterval [t_prev, t_n];
        the diagonal contribution is f1 g_prev + (f2/h)(g_n - g_prev)."""
        self._require_started()
        h = t_n - self._t_hist[-1]
        if h <= 0:
            raise OrderingError(f"time {t_n} not beyond current time")
        f1, f2 = self._f12(h)
        return f1, f2, h

    # -- stepping ------------------------------------------------------------------

    def _finish_step(self, t_n: float, g_arr: np.ndarray) -> None:
        reads = self._step_reads
        reads.update((self._t_hist[-1], t_n))
        self.counters.g_reads += len(reads)
        self.counters.g_reads_step_max = max(self.counters.g_reads_step_max, len(reads))
        self._step_reads = set()
        self._t_hist.append(float(t_n))
        self._g_hist.append(g_arr)
        if len(self._t_hist) > 3:
            del self._t_hist[0]
            del self._g_hist[0]

    def commit(self, t_n: float, g_n) -> None:
        """Advance the step bookkeeping to t_n with the sample g(t_n):
        copy refresh and selection first (pre-advance records), then
        Algorithm 1 on the banks."""
        self._check_time(t_n)
        g_arr = self._coerce(g_n)
        if self.debug and self.last_plan is not None and self.last_plan.t == t_n:
            probe_sel = list(self.last_plan.selected)
        else:
            probe_sel = None
        self.update_copies(t_n)
        if probe_sel is not None:
            got = [l + 1 for l in range(self.L) if self._last_sel[l]]
            if got != probe_sel:
                raise AssertionError(
                    f"probe/commit selection mismatch at t={t_n}: {probe_sel} vs {got}")
        self.advance_all(t_n, g_arr)
        self._finish_step(t_n, g_arr)

    def evaluate(self, t_n: float, g_n) -> np.ndarray:
        """u(t_n) for the explicit case: history plus the diagonal direct
        step with the fresh sample, then commit."""
        g_arr = self._coerce(g_n)
        t_prev = self._t_hist[-1] if self._t_hist else 0.0
        g_prev = self._g_hist[-1] if self._g_hist else g_arr
        out = self.history(t_n)
        out = out + self.direct_step(t_n, t_prev, t_n, g_prev, g_arr)
        plan = self.last_plan
        plan.segments.append(Segment("diag", t_prev, t_n))
        self.commit(t_n, g_arr)
        self.last_plan = plan
        return out

    @property
    def time(self) -> float:
        self._require_started()
        return self._t_hist[-1]


def convolve_on_grid(transform: SectorialTransform, times, g_samples, *,
                     B: int = 5, constants: ContourConstants,
                     h_min: float = None, horizon: float = None,
                     complex_g: bool = False, debug: bool = False):
    """Run the engine over a whole precomputed grid.

    ``times`` must start at 0; returns (u values at times[1:], engine).
    h_min defaults to the smallest grid step.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0:
        raise ConfigurationError("grid must start at t=0")
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise OrderingError("grid must be strictly increasing")
    if h_min is None:
        h_min = float(steps.min())
    if horizon is None:
        horizon = float(times[-1])
    g_samples = np.asarray(g_samples)
    dim = 1 if g_samples.ndim == 1 else g_samples.shape[1]
    eng = ConvolutionEngine(transform, h_min=h_min, B=B, horizon=horizon,
                            constants=constants, dim=dim, complex_g=complex_g,
                            debug=debug)
    eng.begin(g_samples[0])
    out = []
    for i in range(1, len(times)):
        out.append(eng.evaluate(times[i], g_samples[i]))
    return np.array(out), eng
