"""Desk-scale SDP solving: interior-point method, SDPA sparse I/O, hierarchy runs.

Everything is phrased around the standard primal-dual pair

    (P)  min c^T x   s.t.  X = sum_p x_p F_p - F_0,  X >= 0 (psd)
    (D)  max tr(F_0 Y)  s.t.  tr(F_p Y) = c_p for all p,  Y >= 0,

the convention of the SDPA file format.  Moment relaxations compile into the
(P) role: the scalar equality rows (zero rows and the normalization) are
eliminated through a rank-revealing QR presolve and the remaining free y
directions become x.  SOS programs compile into the (D) role: the Gram blocks
are Y, and the free variables (xi and the ideal multipliers) are eliminated
the same way, leaving trace constraints on the Grams.

The solver is a path-following iteration with the HKM (XY-linearized) search
direction and Mehrotra's predictor-corrector, using dense per-block Cholesky
factorizations.  Blocks at desk scale (<= ~100) need no sparsity tricks.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .fjkkt import PopProblem, Variant
from .relax import (
    SdpProblem,
    SosProgram,
    augment_problem,
    build_denominator_sdp,
    build_moment_sdp,
    build_sos_sdp,
    min_order,
)


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 200
    dim_cap: int = 400
    presolve_tol: float = 1e-10
    step_frac: float = 0.98
    refine_iters: int = 40000  # splitting-method budget when the ipm stalls


class SolverError(RuntimeError):
    """Numerical failure inside the interior-point iteration."""

    def __init__(self, message: str, trace: Sequence[tuple] = ()):
        super().__init__(message)
        self.trace = tuple(trace)


@dataclass(frozen=True)
class StandardForm:
    """SDPA-convention data: block sizes (negative = diagonal), costs, F_0..F_m."""

    block_sizes: tuple[int, ...]
    c: np.ndarray
    coeffs: tuple[dict, ...]  # coeffs[p][(block, i, j)] = value, i <= j; p=0 is F_0
    meta: dict = field(compare=False, default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.c)

    @property
    def total_dim(self) -> int:
        return sum(abs(s) for s in self.block_sizes)


@dataclass(frozen=True)
class CompiledSdp:
    form: StandardForm
    side: str  # "primal": value read from (P); "dual": value read from (D)
    offset: float
    recover: dict = field(compare=False, default_factory=dict)


@dataclass
class SdpSolution:
    status: str  # optimal | max_iter | infeasible_suspect
    value: Optional[float]
    primal_value: Optional[float]
    dual_value: Optional[float]
    blocks: list
    dual_vector: Optional[np.ndarray]
    residuals: dict
    iterations: int
    meta: dict = field(default_factory=dict)


# -- presolve helpers ------------------------------------------------------------


def _independent_rows(a: np.ndarray, b: np.ndarray, tol: float):
    """Keep a maximal independent row subset; reject inconsistent dropped rows."""
    if a.shape[0] == 0:
        return a, b
    _, rmat, piv = scipy.linalg.qr(a.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(rmat))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > tol * scale))
    keep = sorted(piv[:rank])
    a_k, b_k = a[keep], b[keep]
    drop = [i for i in range(a.shape[0]) if i not in set(keep)]
    if drop:
        combo, *_ = np.linalg.lstsq(a_k.T, a[drop].T, rcond=None)
        predicted = combo.T @ b_k
        if np.max(np.abs(b[drop] - predicted)) > 1e-7 * (1.0 + np.max(np.abs(b))):
            raise ValueError("inconsistent linear constraints; relaxation infeasible")
    return a_k, b_k


def _diagonal_flagged(sizes, coeffs):
    """Negative size for blocks whose every coefficient entry is diagonal."""
    flagged = []
    for b, s in enumerate(sizes):
        diag_only = s > 1 and all(
            i == j for mat in coeffs for (bb, i, j) in mat if bb == b
        )
        flagged.append(-s if diag_only else s)
    return tuple(flagged)


# -- compiling the two relaxation sides ------------------------------------------


def compile_moment(sdp: SdpProblem, opts: SolveOptions = SolveOptions()) -> CompiledSdp:
    ny = len(sdp.y_basis)
    rows = list(sdp.zero_rows) + [sdp.normalization]
    mat = np.zeros((len(rows), ny))
    rhs = np.zeros(len(rows))
    rhs[-1] = 1.0
    for r, form in enumerate(rows):
        for idx, coeff in form.items():
            mat[r, idx] = float(coeff)
    mat_k, rhs_k = _independent_rows(mat, rhs, opts.presolve_tol)
    if mat_k.shape[0]:
        y_part, *_ = np.linalg.lstsq(mat_k, rhs_k, rcond=None)
        if np.max(np.abs(mat_k @ y_part - rhs_k)) > 1e-8:
            raise ValueError("inconsistent equality rows; moment relaxation infeasible")
        null = scipy.linalg.null_space(mat_k)
    else:
        y_part = np.zeros(ny)
        null = np.eye(ny)
    nz = null.shape[1]

    obj = np.zeros(ny)
    for idx, coeff in sdp.objective.items():
        obj[idx] = float(coeff)
    c = null.T @ obj
    offset = float(obj @ y_part)

    coeffs: list[dict] = [dict() for _ in range(nz + 1)]
    sizes = []
    for b, block in enumerate(sdp.blocks):
        sizes.append(block.size)
        for (i, j), form in block.entries.items():
            vec = np.zeros(ny)
            for idx, coeff in form.items():
                vec[idx] = float(coeff)
            const = float(vec @ y_part)
            if const != 0.0:
                coeffs[0][(b, i, j)] = -const
            weights = vec @ null
            for q in range(nz):
                if abs(weights[q]) > 1e-14:
                    coeffs[q + 1][(b, i, j)] = float(weights[q])
    form = StandardForm(
        _diagonal_flagged(sizes, coeffs),
        c,
        tuple(coeffs),
        {"kind": "moment", "k": sdp.k},
    )
    recover = {"y_particular": y_part, "null_basis": null}
    return CompiledSdp(form, "primal", offset, recover)


def compile_sos(prog: SosProgram, opts: SolveOptions = SolveOptions()) -> CompiledSdp:
    gram_keys = []
    gram_sizes = []
    for b, gram in enumerate(prog.gram_blocks):
        s = len(gram.basis)
        gram_sizes.append(s)
        for i in range(s):
            for j in range(i, s):
                gram_keys.append(("G", b, i, j))
    free_keys = [("xi",)]
    for t, im in enumerate(prog.ideal_multipliers):
        for l in range(len(im.basis)):
            free_keys.append(("u", t, l))
    gram_index = {key: p for p, key in enumerate(gram_keys)}
    free_index = {key: p for p, key in enumerate(free_keys)}

    neq = len(prog.equations)
    lmat = np.zeros((neq, len(gram_keys)))
    fmat = np.zeros((neq, len(free_keys)))
    rvec = np.zeros(neq)
    for r, eq in enumerate(prog.equations):
        rvec[r] = float(eq.rhs)
        for key, coeff in eq.lhs.items():
            if key[0] == "G":
                lmat[r, gram_index[key]] = float(coeff)
            else:
                fmat[r, free_index[key]] = float(coeff)

    null = scipy.linalg.null_space(fmat)
    if null.size and np.max(np.abs(null[0, :])) > 1e-8:
        raise ValueError(
            "xi is not determined by the identity; the truncated ideal contains constants"
        )
    pinv = np.linalg.pinv(fmat, rcond=opts.presolve_tol)
    xi_row = pinv[0]
    leftnull = scipy.linalg.null_space(fmat.T)
    amat = leftnull.T @ lmat
    bvec = leftnull.T @ rvec
    amat, bvec = _independent_rows(amat, bvec, opts.presolve_tol)

    def as_entries(row):
        out = {}
        for col, v in enumerate(row):
            if abs(v) <= 1e-14:
                continue
            _, b, i, j = gram_keys[col]
            out[(b, i, j)] = float(v) / (2.0 if i != j else 1.0)
        return out

    coeffs = [as_entries(-(xi_row @ lmat))]
    for p in range(amat.shape[0]):
        coeffs.append(as_entries(amat[p]))
    offset = float(xi_row @ rvec)
    form = StandardForm(
        _diagonal_flagged(gram_sizes, coeffs),
        bvec,
        tuple(coeffs),
        {"kind": "sos", "k": prog.k},
    )
    recover = {
        "pinv": pinv,
        "lmat": lmat,
        "rvec": rvec,
        "free_keys": free_keys,
        "gram_keys": gram_keys,
        "gram_sizes": gram_sizes,
    }
    return CompiledSdp(form, "dual", offset, recover)


# -- exact kernel closure for degenerate moment relaxations ------------------------


class _RationalSpan:
    """Row space over Q of sparse integer-indexed forms.

    Stored rows are reduced against all pivots present at insert time, so a
    row can only mention pivots inserted after it; reduction therefore walks
    strictly forward through the pivot set and terminates.
    """

    __slots__ = ("pivots",)

    def __init__(self, rows: Sequence[dict] = ()):
        self.pivots: dict[int, dict[int, Fraction]] = {}
        for row in rows:
            self.add(row)

    def reduce(self, form: dict) -> dict:
        res = {i: Fraction(c) for i, c in form.items() if c}
        while True:
            hit = next((i for i in res if i in self.pivots), None)
            if hit is None:
                return res
            coeff = res.pop(hit)
            for j, pc in self.pivots[hit].items():
                if j == hit:
                    continue
                val = res.get(j, Fraction(0)) - coeff * pc
                if val:
                    res[j] = val
                else:
                    res.pop(j, None)

    def contains(self, form: dict) -> bool:
        return not self.reduce(form)

    def add(self, form: dict) -> bool:
        """Insert a row; True when it was independent and the span grew."""
        res = self.reduce(form)
        if not res:
            return False
        piv = min(res)
        inv = res[piv]
        self.pivots[piv] = {j: c / inv for j, c in res.items()}
        return True


def _block_vform(block, v: dict) -> dict:
    """v^T M(y) v as an exact linear form in y, from upper-triangle entries."""
    zero = Fraction(0)
    out: dict[int, Fraction] = {}
    for (i, j), form in block.entries.items():
        w = v.get(i, zero) * v.get(j, zero)
        if not w:
            continue
        if i != j:
            w *= 2
        for idx, coeff in form.items():
            val = out.get(idx, zero) + w * coeff
            if val:
                out[idx] = val
            else:
                out.pop(idx, None)
    return out


def _block_vrows(block, v: dict) -> list[dict]:
    """The rows of M(y) v, each an exact linear form in y."""
    zero = Fraction(0)
    rows = []
    for r in range(block.size):
        acc: dict[int, Fraction] = {}
        for j, w in v.items():
            form = block.entries.get((min(r, j), max(r, j)))
            if not form:
                continue
            for idx, coeff in form.items():
                val = acc.get(idx, zero) + w * coeff
                if val:
                    acc[idx] = val
                else:
                    acc.pop(idx, None)
        if acc:
            rows.append(acc)
    return rows


def _block_mform(block, vmat: dict) -> dict:
    """tr(M(y) V) as an exact linear form in y; V as upper-triangle Fractions."""
    zero = Fraction(0)
    out: dict[int, Fraction] = {}
    for (i, j), w in vmat.items():
        form = block.entries.get((i, j))
        if not form or not w:
            continue
        if i != j:
            w *= 2
        for idx, coeff in form.items():
            val = out.get(idx, zero) + w * coeff
            if val:
                out[idx] = val
            else:
                out.pop(idx, None)
    return out


def _psd_rational(vmat: dict, size: int) -> bool:
    """Exact psd test of a symmetric rational matrix by fraction-free elimination."""
    zero = Fraction(0)
    a = [
        [vmat.get((min(i, j), max(i, j)), zero) for j in range(size)]
        for i in range(size)
    ]
    for p in range(size):
        piv = a[p][p]
        if piv < 0:
            return False
        if piv == 0:
            if any(a[p][q] for q in range(p + 1, size)):
                return False  # zero diagonal with nonzero row: indefinite
            continue
        for r in range(p + 1, size):
            f = a[r][p] / piv
            if not f:
                continue
            prow = a[p]
            rrow = a[r]
            for q in range(p, size):
                rrow[q] -= f * prow[q]
    return True


def _snap_directions(vt: np.ndarray, den: int = 32, guard: float = 5e-3) -> list[dict]:
    """Rational candidates spanning a numeric subspace: float RREF, then snap.

    Exposing eigenspaces of moment faces are rational in the monomial
    coordinates, with small denominators; the certificate is only O(sqrt(mu))
    accurate, so entries are snapped and the exact verification is left to
    the caller.  Rows whose entries do not sit near a small rational are
    dropped rather than guessed.
    """
    a = np.array(vt, dtype=float)
    if a.ndim != 2 or not a.size:
        return []
    nr, nc = a.shape
    r = 0
    for _ in range(nr):
        sub = np.abs(a[r:])
        if not sub.size or sub.max() < 1e-8:
            break
        i, col = divmod(int(np.argmax(sub)), nc)
        a[[r, r + i]] = a[[r + i, r]]
        a[r] = a[r] / a[r, col]
        for q in range(nr):
            if q != r:
                a[q] = a[q] - a[q, col] * a[r]
        r += 1
    out = []
    for row in a[:r]:
        snapped: dict[int, Fraction] = {}
        ok = True
        for idx, val in enumerate(row):
            frac = Fraction(float(val)).limit_denominator(den)
            if abs(float(frac) - float(val)) > guard:
                ok = False
                break
            if frac:
                snapped[idx] = frac
        if ok and snapped:
            out.append(snapped)
    return out


def _kernel_closure(sdp: SdpProblem, opts: SolveOptions, rounds: int = 8):
    """Exactly verified forced-kernel rows for a degenerate moment relaxation.

    When the feasible set lies in a proper face of the psd cone, there are
    directions v with  v^T M(y) v = 0  for every feasible y, and then
    M(y) v = 0 entrywise (psd).  Whether the quadratic form is forced to
    vanish is decidable exactly: it is a rational linear form in y, forced to
    zero precisely when it lies in the rational row space of the zero rows
    (grown as new rows are verified).  Verified vectors contribute the rows
    of M(y) v as new exact equalities, which in turn can force further
    directions, so the sweep iterates to a closure.  Candidates come from
    coordinate directions and from rational snapping of the exposing
    eigenspace of the auxiliary problem  max t : X(x) >= t I  solved on the
    current augmentation.  Only exact verification admits a candidate; the
    augmented problem is therefore equivalent to the input, and the solved
    value carries over unchanged.

    Returns (rows, vectors): the new equality rows, and the verified kernel
    basis per block as float vectors.
    """
    span = _RationalSpan(sdp.zero_rows)
    kernels = [_RationalSpan() for _ in sdp.blocks]
    extra: list[dict] = []

    def admit(b: int, v: dict) -> bool:
        if not v or not kernels[b].reduce(v):
            return False
        if not span.contains(_block_vform(sdp.blocks[b], v)):
            return False
        kernels[b].add(v)
        for row in _block_vrows(sdp.blocks[b], v):
            if span.add(row):
                extra.append(row)
        return True

    def admit_matrix(b: int, vmat: dict) -> bool:
        # tr(M(y) V) in the row space with V psd forces M(y) V = 0, which
        # makes every column of V a kernel vector even when no single column
        # passes the quadratic-form test on its own
        block = sdp.blocks[b]
        cols: dict[int, dict[int, Fraction]] = {}
        for (i, j), w in vmat.items():
            if w:
                cols.setdefault(j, {})[i] = w
                if i != j:
                    cols.setdefault(i, {})[j] = w
        if not any(kernels[b].reduce(col) for col in cols.values()):
            return False
        if not _psd_rational(vmat, block.size):
            return False
        if not span.contains(_block_mform(block, vmat)):
            return False
        grew = False
        for col in cols.values():
            if kernels[b].add(col):
                grew = True
                for row in _block_vrows(block, col):
                    if span.add(row):
                        extra.append(row)
        return grew

    for _ in range(rounds):
        grew = False
        for b, block in enumerate(sdp.blocks):
            for i in range(block.size):
                if admit(b, {i: Fraction(1)}):
                    grew = True
        aug = (
            replace(sdp, zero_rows=sdp.zero_rows + tuple(extra)) if extra else sdp
        )
        try:
            form = compile_moment(aug, opts).form
        except ValueError:
            break
        if form.m == 0:
            break
        dense = _dense_blocks(form)
        sizes = [abs(s) for s in form.block_sizes]
        # probe the *face*: any direction already eliminated locks the
        # unreduced auxiliary value at zero and would mask strict feasibility
        packed, qs, rsizes = _face_reduce(dense, sizes)
        alive = [b for b in range(len(sizes)) if rsizes[b] > 0]
        if not alive:
            break
        f0 = [packed[0][b] for b in alive]
        fs = [[packed[p + 1][b] for b in alive] for p in range(form.m)]
        scale = 1.0 + max(_frob(f0), max((_frob(r) for r in fs), default=0.0))
        aux_fs = [list(r) for r in fs] + [[-np.eye(rsizes[b]) for b in alive]]
        aux_c = np.concatenate([np.zeros(form.m), [-1.0]])
        try:
            aux = _ipm(f0, aux_fs, aux_c, opts)
        except SolverError:
            break
        if float(np.max(np.abs(aux["x"]))) > 1e9 or -aux["pobj"] > 1e-6 * scale:
            break  # strictly feasible on the face; closure complete
        if aux["status"] != "optimal":
            break
        threshold = _split_spectrum([np.linalg.eigvalsh(y) for y in aux["Y"]])
        if threshold is not None:
            for pos, b in enumerate(alive):
                vals, eigvecs = np.linalg.eigh(aux["Y"][pos])
                keep = vals >= threshold
                cut = eigvecs[:, keep]
                if not cut.size:
                    continue
                for cand in _snap_directions((qs[b] @ cut).T):
                    if admit(b, cand):
                        grew = True
                # the certificate matrix is rational up to scale even when
                # its eigenvectors are not; snap the whole ray representative
                recon = qs[b] @ (cut * vals[keep]) @ cut.T @ qs[b].T
                top = float(np.max(np.abs(recon)))
                if top <= 0:
                    continue
                vsnap = None
                for den in (32, 64, 128, 256, 512):
                    cand: dict = {}
                    ok = True
                    for i in range(recon.shape[0]):
                        if not ok:
                            break
                        for j in range(i, recon.shape[0]):
                            val = float(recon[i, j]) / top
                            fr = Fraction(val).limit_denominator(den)
                            if abs(float(fr) - val) > 1e-5:
                                ok = False
                                break
                            if fr:
                                cand[(i, j)] = fr
                    if ok and cand:
                        vsnap = cand
                        break
                if vsnap and admit_matrix(b, vsnap):
                    grew = True
        if not grew:
            break
    vecs = [
        [
            np.array([float(row.get(i, 0)) for i in range(block.size)])
            for row in kernels[b].pivots.values()
        ]
        for b, block in enumerate(sdp.blocks)
    ]
    return tuple(extra), vecs


def _affine_contained(msdp: SdpProblem, form: StandardForm, tol: float = 1e-7) -> bool:
    """Check that the (P)-side slack of a compiled form lives in a moment structure.

    Concretely: each coefficient matrix (and the offset -F_0) must match the
    entry pattern M_b(w) for some w that satisfies the zero rows, with
    normalization weight 0 on directions and 1 on the offset.  When this
    holds, forced-kernel directions of the moment feasible set are forced on
    the compiled problem as well.
    """
    sizes = [abs(s) for s in form.block_sizes]
    if [b.size for b in msdp.blocks] != sizes:
        return False
    ny = len(msdp.y_basis)
    slots = []
    for b, block in enumerate(msdp.blocks):
        for (i, j), lin in block.entries.items():
            slots.append((b, i, j, lin))
    smat = np.zeros((len(slots), ny))
    for r, (_, _, _, lin) in enumerate(slots):
        for idx, cf in lin.items():
            smat[r, idx] = float(cf)
    m = form.m
    tmat = np.zeros((len(slots), m + 1))
    for p in range(m + 1):
        sgn = -1.0 if p == 0 else 1.0  # the affine offset at x = 0 is -F_0
        co = form.coeffs[p]
        for r, (b, i, j, _) in enumerate(slots):
            tmat[r, p] = sgn * co.get((b, i, j), 0.0)
    scale = 1.0 + float(np.max(np.abs(tmat))) if tmat.size else 1.0
    w, *_ = np.linalg.lstsq(smat, tmat, rcond=None)
    if np.max(np.abs(smat @ w - tmat)) > tol * scale:
        return False
    rows = np.zeros((len(msdp.zero_rows) + 1, ny))
    for r, row in enumerate(msdp.zero_rows):
        for idx, cf in row.items():
            rows[r, idx] = float(cf)
    for idx, cf in msdp.normalization.items():
        rows[-1, idx] = float(cf)
    want = np.zeros((rows.shape[0], m + 1))
    want[-1, 0] = 1.0
    return bool(np.max(np.abs(rows @ w - want)) <= tol * scale)


def _sos_kernel_hints(prog: SosProgram, form: StandardForm, opts: SolveOptions):
    """Forced Gram-face directions for a stalled SOS solve, derived exactly.

    The (P)-side slack of a compiled SOS program is structurally a tuple of
    localizing moment matrices over the same bases (the free-variable
    elimination enforces the ideal rows by construction), which
    _affine_contained verifies on the numeric data.  Under that containment
    every exactly verified forced-kernel direction of the corresponding
    moment relaxation is also forced here, and can seed the facial rescue
    with noise-free cut directions.  Returns per-block vector lists or None.
    """
    try:
        pop = PopProblem(
            f=prog.target,
            g=tuple(gb.generator for gb in prog.gram_blocks[1:]),
            h=tuple(im.h for im in prog.ideal_multipliers),
            var_names=prog.var_names,
        )
        msdp = build_moment_sdp(pop, prog.k)
    except (ValueError, KeyError):
        return None
    norm = {
        msdp.y_basis.index_of(mono): coeff
        for mono, coeff in prog.xi_weight.terms.items()
    }
    msdp = replace(msdp, normalization=norm)
    if not _affine_contained(msdp, form):
        return None
    _, vecs = _kernel_closure(msdp, opts)
    if not any(len(v) for v in vecs):
        return None
    return vecs


# -- the interior-point core ------------------------------------------------------


def _dense_blocks(form: StandardForm) -> list[list[np.ndarray]]:
    sizes = [abs(s) for s in form.block_sizes]
    out = []
    for p in range(form.m + 1):
        mats = [np.zeros((s, s)) for s in sizes]
        for (b, i, j), v in form.coeffs[p].items():
            mats[b][i, j] = v
            mats[b][j, i] = v
        out.append(mats)
    return out


def _frob(mats) -> float:
    return float(np.sqrt(sum(float(np.sum(m * m)) for m in mats)))


def _chol(mat: np.ndarray, trace) -> np.ndarray:
    jitter = 0.0
    for _ in range(3):
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(len(mat)))
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100.0, 1e-14 * max(1.0, float(np.trace(mat))))
    raise SolverError("Cholesky factorization failed", trace)


def _max_step(blocks, dblocks, trace) -> float:
    alpha = np.inf
    for s, ds in zip(blocks, dblocks):
        if s.shape[0] == 0:
            continue
        if not np.all(np.isfinite(ds)):
            raise SolverError("non-finite search direction", trace)
        low = _chol(s, trace)
        inv_low = scipy.linalg.solve_triangular(low, np.eye(len(s)), lower=True)
        scaled = inv_low @ ds @ inv_low.T
        try:
            lam = float(np.linalg.eigvalsh((scaled + scaled.T) / 2.0).min())
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"step-length eigenvalues failed: {exc}", trace) from exc
        if lam < 0:
            alpha = min(alpha, -1.0 / lam)
    return alpha


def _feasible_step(blocks, dblocks, alpha: float) -> float:
    """Shrink alpha until every S + alpha dS admits a Cholesky factorization.

    The eigenvalue-based step bound can overshoot by rounding when iterates hug
    the cone boundary; verifying by factorization keeps them strictly inside.
    """
    while alpha >= 1e-16:
        ok = True
        for s, ds in zip(blocks, dblocks):
            if s.shape[0] == 0:
                continue
            try:
                np.linalg.cholesky(s + alpha * ds)
            except np.linalg.LinAlgError:
                ok = False
                break
        if ok:
            return alpha
        alpha *= 0.5
    return 0.0


def _face_reduce(dense, sizes, tol=1e-9):
    """Quotient each block by the common null space of all its coefficient matrices.

    Equality rows make every feasible moment matrix singular along the truncated
    ideal, so the primal cone has empty interior; restricting each block to the
    common range restores strict feasibility without changing either optimum.
    The rank threshold is relative to the largest block so that a block whose
    coefficients have been eliminated down to roundoff is dropped entirely.
    """
    svds = []
    top = 0.0
    for b in range(len(sizes)):
        stacked = np.concatenate([mats[b] for mats in dense], axis=0)
        if stacked.size == 0:
            svds.append((None, None))
            continue
        _, sig, vt = np.linalg.svd(stacked)
        svds.append((sig, vt))
        if sig.size:
            top = max(top, float(sig[0]))
    bases = []
    reduced_sizes = []
    for b, s in enumerate(sizes):
        sig, vt = svds[b]
        if sig is None:
            bases.append(np.zeros((s, 0)))
            reduced_sizes.append(0)
            continue
        rank = int(np.sum(sig > tol * top)) if top > 0 else 0
        bases.append(vt[:rank].T)
        reduced_sizes.append(rank)
    reduced = [
        [bases[b].T @ mats[b] @ bases[b] for b in range(len(sizes))] for mats in dense
    ]
    return reduced, bases, reduced_sizes


@np.errstate(over="ignore", invalid="ignore")  # divergence is detected, not warned
def _ipm(f0, fs, c, opts: SolveOptions) -> dict:
    """Core predictor-corrector iteration on dense blocks; all sizes positive."""
    nblocks = len(f0)
    sizes = [f0[b].shape[0] for b in range(nblocks)]
    total = sum(sizes)
    m = len(c)

    def residuals(x, xb, yb):
        rp = [
            sum(x[p] * fs[p][b] for p in range(m)) - f0[b] - xb[b]
            for b in range(nblocks)
        ]
        rd = c - np.array(
            [sum(float(np.sum(fs[p][b] * yb[b])) for b in range(nblocks)) for p in range(m)]
        )
        pobj = float(c @ x)
        dobj = sum(float(np.sum(f0[b] * yb[b])) for b in range(nblocks))
        pinf = _frob(rp) / (1.0 + _frob(f0))
        dinf = float(np.max(np.abs(rd))) / (1.0 + float(np.max(np.abs(c))))
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return rp, rd, pobj, dobj, pinf, dinf, gap

    scale = max(
        10.0, _frob(f0), max((_frob(fp) for fp in fs), default=1.0), float(np.max(np.abs(c)))
    )
    x = np.zeros(m)
    xb = [scale * np.eye(s) for s in sizes]
    yb = [scale * np.eye(s) for s in sizes]

    # per-block stacks of the constraint matrices, for vectorized Schur assembly
    stacks = [
        np.stack([fs[p][b] for p in range(m)]) if sizes[b] else np.zeros((m, 0, 0))
        for b in range(nblocks)
    ]
    flat = [stacks[b].reshape(m, -1) for b in range(nblocks)]

    trace: list[tuple] = []
    status = "max_iter"
    stalls = 0
    best_err = np.inf
    best_point = None
    no_progress = 0
    it = 0
    res = residuals(x, xb, yb)
    for it in range(1, opts.max_iter + 1):
        rp, rd, pobj, dobj, pinf, dinf, gap = res
        mu = sum(float(np.sum(xb[b] * yb[b])) for b in range(nblocks)) / total
        trace.append((it, pobj, dobj, pinf, dinf, gap, mu))
        if pinf <= opts.tol and dinf <= opts.tol and gap <= opts.tol:
            status = "optimal"
            break
        if mu <= 0.0:
            break
        err = max(pinf, dinf, gap)
        if err < best_err:
            best_point = (x, xb, yb, res)
        if err < 0.995 * best_err:
            best_err = min(best_err, err)
            no_progress = 0
        else:
            best_err = min(best_err, err)
            no_progress += 1
            if no_progress >= 40:
                break

        try:
            xinv = []
            for b in range(nblocks):
                low = _chol(xb[b], trace)
                inv_low = scipy.linalg.solve_triangular(
                    low, np.eye(sizes[b]), lower=True
                )
                xinv.append(inv_low.T @ inv_low)

            schur = np.zeros((m, m))
            for b in range(nblocks):
                if sizes[b] == 0:
                    continue
                tq = np.matmul(xinv[b], np.matmul(stacks[b], yb[b]))
                schur += flat[b] @ tq.reshape(m, -1).T
            try:
                lu = scipy.linalg.lu_factor(schur)
            except (scipy.linalg.LinAlgError, ValueError):
                reg = 1e-12 * max(1.0, float(np.max(np.abs(schur))))
                lu = scipy.linalg.lu_factor(schur + reg * np.eye(m))

            def direction(rc):
                rhs = np.empty(m)
                for b in range(nblocks):
                    mblk = xinv[b] @ (rc[b] - rp[b] @ yb[b])
                    contrib = flat[b] @ mblk.ravel()
                    if b == 0:
                        rhs[:] = contrib
                    else:
                        rhs += contrib
                rhs -= rd
                dx = scipy.linalg.lu_solve(lu, rhs)
                dxb = [
                    np.tensordot(dx, stacks[b], axes=(0, 0)) + rp[b]
                    for b in range(nblocks)
                ]
                dyb = []
                for b in range(nblocks):
                    dy = xinv[b] @ (rc[b] - dxb[b] @ yb[b])
                    dyb.append((dy + dy.T) / 2.0)
                return dx, dxb, dyb

            rc_aff = [-(xb[b] @ yb[b]) for b in range(nblocks)]
            dx_a, dxb_a, dyb_a = direction(rc_aff)
            ap_a = min(1.0, _max_step(xb, dxb_a, trace))
            ad_a = min(1.0, _max_step(yb, dyb_a, trace))
            mu_aff = sum(
                float(np.sum((xb[b] + ap_a * dxb_a[b]) * (yb[b] + ad_a * dyb_a[b])))
                for b in range(nblocks)
            ) / total
            sigma = min(max((max(mu_aff, 0.0) / mu) ** 3, 1e-8), 1.0)
            if pinf > opts.tol or dinf > opts.tol:
                # keep some centering while infeasible; pure Mehrotra starves it
                sigma = max(sigma, 0.2)

            rc = [
                sigma * mu * np.eye(sizes[b]) - xb[b] @ yb[b] - dxb_a[b] @ dyb_a[b]
                for b in range(nblocks)
            ]
            dx, dxb, dyb = direction(rc)
            ap = _feasible_step(
                xb, dxb, min(1.0, opts.step_frac * _max_step(xb, dxb, trace))
            )
            ad = _feasible_step(
                yb, dyb, min(1.0, opts.step_frac * _max_step(yb, dyb, trace))
            )
        except (SolverError, ValueError, np.linalg.LinAlgError):
            # numerical breakdown (overflowing iterates, singular or
            # non-finite factors): stop and report the best iterate seen;
            # the divergence heuristics downstream classify the failure
            break
        if ap < 1e-10 and ad < 1e-10:
            stalls += 1
            if stalls >= 3:
                break
        else:
            stalls = 0
        x = x + ap * dx
        xb = [xb[b] + ap * dxb[b] for b in range(nblocks)]
        yb = [yb[b] + ad * dyb[b] for b in range(nblocks)]
        res = residuals(x, xb, yb)
        if not all(np.isfinite(v) for v in res[2:]):
            if best_point is not None:
                x, xb, yb, res = best_point
            break

    rp, rd, pobj, dobj, pinf, dinf, gap = res
    if status != "optimal" and best_point is not None:
        # a late wrecked step must not hide the best iterate seen
        bx, bxb, byb, bres = best_point
        if max(bres[4], bres[5], bres[6]) < max(pinf, dinf, gap):
            x, xb, yb = bx, bxb, byb
            rp, rd, pobj, dobj, pinf, dinf, gap = bres
    if pinf <= opts.tol and dinf <= opts.tol and gap <= opts.tol:
        status = "optimal"
    if status != "optimal":
        # an improving ray on one feasible side is divergence evidence for
        # the other side; report suspicion, never a certificate
        for _, tp, td, tpi, tdi, _, _ in trace:
            if td > 1e12 * scale and tdi <= 1e-4:
                status = "infeasible_suspect"
                break
            if tp < -1e12 * scale and tpi <= 1e-4:
                status = "infeasible_suspect"
                break
    return {
        "status": status,
        "x": x,
        "X": xb,
        "Y": yb,
        "pobj": pobj,
        "dobj": dobj,
        "residuals": {"primal": pinf, "dual": dinf, "gap": gap},
        "iterations": it,
        "trace": trace,
    }


def _recheck(f0, fs, c, raw, opts: SolveOptions) -> dict:
    """Re-evaluate a solve against unperturbed data, resetting the status."""
    m = len(c)
    nblocks = len(f0)
    x, xb, yb = raw["x"], raw["X"], raw["Y"]
    rp = [
        sum(x[p] * fs[p][b] for p in range(m)) - f0[b] - xb[b] for b in range(nblocks)
    ]
    rd = c - np.array(
        [sum(float(np.sum(fs[p][b] * yb[b])) for b in range(nblocks)) for p in range(m)]
    )
    pobj = float(c @ x)
    dobj = sum(float(np.sum(f0[b] * yb[b])) for b in range(nblocks))
    pinf = _frob(rp) / (1.0 + _frob(f0))
    dinf = float(np.max(np.abs(rd))) / (1.0 + float(np.max(np.abs(c))))
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    status = "optimal" if max(pinf, dinf, gap) <= opts.tol else raw["status"]
    out = dict(raw)
    out.update(
        status=status,
        pobj=pobj,
        dobj=dobj,
        residuals={"primal": pinf, "dual": dinf, "gap": gap},
    )
    return out


def _split_spectrum(vals_by_block):
    """Pick a cut threshold at the topmost decisive gap of the pooled spectrum.

    Exposing certificates of iterated faces are multi-scale: each layer of
    the face shows up as one cluster.  Cutting only the topmost cluster per
    round (ratio jump >= 1e2) and re-solving the auxiliary problem resolves
    the weaker layers on later rounds.  Returns None when even the top of
    the spectrum has no decisive gap, which happens on thin but strictly
    feasible problems where cutting would be wrong.
    """
    pooled = np.sort(np.concatenate([np.abs(v) for v in vals_by_block]))
    top = pooled[-1] if pooled.size else 0.0
    if top <= 0.0:
        return None
    floor = 1e-12 * top
    for hi, lo in zip(pooled[::-1][:-1], pooled[::-1][1:]):
        if hi / max(lo, floor) >= 1e2:
            return float(np.sqrt(max(lo, floor) * hi))
    return None


def _facial_rescue(f0, fs, c, opts: SolveOptions, rounds: int = 5, seed_cuts=None):
    """Certificate-based facial reduction, then a clean solve on the face.

    Strict feasibility of  X(x) = sum x_p F_p - F_0 >= 0  is probed with the
    auxiliary problem  max t : X(x) >= t*I, which itself always satisfies
    Slater's condition and therefore solves reliably.  When its value is
    essentially zero, the auxiliary dual solution Y' is an exposing
    certificate (tr(F_p Y') = 0, tr(F_0 Y') = 0, Y' >= 0), so every feasible
    X satisfies X Y' = 0.  One round then (a) restricts each block to the
    near-kernel of Y', and (b) adds the induced linear equations
    X(x) v = 0 for the cut directions v, eliminating them from x.  Both
    halves are needed: restriction alone loosens the problem and can make it
    unbounded.  Rounds repeat until the auxiliary value is positive.

    seed_cuts, when given, is a per-block list of known forced-kernel
    directions (from exact verification upstream); the first round cuts
    those instead of consulting the auxiliary certificate.

    Returns None when no reduction applies, or a result dict whose primal
    witness has been re-expanded and re-checked against the *input* data,
    while the dual witness and gap are certified on the reduced pair (the
    input dual optimum is typically unattained, which is what breaks the
    path-following iteration in the first place; no finite input-coordinate
    dual witness exists).
    """
    nblocks = len(f0)
    m = len(c)
    bases = [np.eye(f0[b].shape[0]) for b in range(nblocks)]
    x_part = np.zeros(m)
    x_map = np.eye(m)  # x = x_part + x_map @ z
    cur_f0 = list(f0)
    cur_fs = [list(row) for row in fs]
    cur_c = np.asarray(c, dtype=float)
    reduced = False
    for rnd in range(rounds):
        sizes = [cur_f0[b].shape[0] for b in range(nblocks)]
        mcur = len(cur_c)
        if sum(sizes) == 0 or mcur == 0:
            break
        rows, rhs, new_q = [], [], []
        if rnd == 0 and seed_cuts is not None and any(len(v) for v in seed_cuts):
            for b in range(nblocks):
                vs = seed_cuts[b] if b < len(seed_cuts) else []
                if sizes[b] == 0 or not vs:
                    new_q.append(np.eye(sizes[b]))
                    continue
                vmat = scipy.linalg.orth(np.column_stack(vs))
                new_q.append(scipy.linalg.null_space(vmat.T))
                for v in vmat.T:
                    rows.append(np.array([cur_fs[p][b] @ v for p in range(mcur)]).T)
                    rhs.append(cur_f0[b] @ v)
        else:
            scale = 1.0 + max(
                _frob(cur_f0), max((_frob(r) for r in cur_fs), default=0.0)
            )
            aux_fs = [list(row) for row in cur_fs] + [[-np.eye(s) for s in sizes]]
            aux_c = np.concatenate([np.zeros(mcur), [-1.0]])
            try:
                aux = _ipm(cur_f0, aux_fs, aux_c, opts)
            except SolverError:
                break
            if float(np.max(np.abs(aux["x"]))) > 1e9 or -aux["pobj"] > 1e-6 * scale:
                break  # strictly feasible; nothing left to cut
            usable = aux["status"] == "optimal" or (
                aux["residuals"]["gap"] <= 1e-4 and aux["residuals"]["dual"] <= 1e-4
            )
            if not usable:
                # a sloppy certificate would cut the wrong face; the
                # consistency check below cannot catch every such error
                break
            threshold = _split_spectrum(
                [np.linalg.eigvalsh(aux["Y"][b]) for b in range(nblocks) if sizes[b]]
            )
            if threshold is None:
                break
            for b in range(nblocks):
                if sizes[b] == 0:
                    new_q.append(np.zeros((0, 0)))
                    continue
                vals, vecs = np.linalg.eigh(aux["Y"][b])
                keep = vals < threshold
                new_q.append(vecs[:, keep])
                for v in vecs[:, ~keep].T:
                    # induced equations: X(x) v = 0 componentwise
                    rows.append(np.array([cur_fs[p][b] @ v for p in range(mcur)]).T)
                    rhs.append(cur_f0[b] @ v)
        if all(q.shape[1] == q.shape[0] for q in new_q):
            break  # certificate exposes nothing
        amat = np.vstack(rows) if rows else np.zeros((0, mcur))
        bvec = np.concatenate(rhs) if rhs else np.zeros(0)
        try:
            asel, bsel = _independent_rows(amat, bvec, opts.presolve_tol)
        except ValueError:
            break  # inconsistent certificate at this accuracy; keep prior rounds
        nsel = asel.shape[0]
        part = np.linalg.lstsq(asel, bsel, rcond=None)[0] if nsel else np.zeros(mcur)
        null = scipy.linalg.null_space(asel) if nsel else np.eye(mcur)
        x_part = x_part + x_map @ part
        x_map = x_map @ null
        shifted = [
            sum(part[p] * cur_fs[p][b] for p in range(mcur)) - cur_f0[b]
            for b in range(nblocks)
        ]
        cur_f0 = [new_q[b].T @ (-shifted[b]) @ new_q[b] for b in range(nblocks)]
        cur_fs = [
            [
                new_q[b].T
                @ sum(null[p, q] * cur_fs[p][b] for p in range(mcur))
                @ new_q[b]
                for b in range(nblocks)
            ]
            for q in range(null.shape[1])
        ]
        cur_c = null.T @ cur_c
        bases = [bases[b] @ new_q[b] for b in range(nblocks)]
        # directions whose coefficients vanished with the cut would make the
        # Schur complement singular; costless ones are fixed at zero
        fscale = 1.0 + _frob(cur_f0)
        cscale = 1.0 + float(np.max(np.abs(cur_c))) if cur_c.size else 1.0
        live = []
        for p in range(len(cur_c)):
            mag = max(
                (float(np.max(np.abs(mat))) if mat.size else 0.0 for mat in cur_fs[p]),
                default=0.0,
            )
            if mag > 1e-12 * fscale:
                live.append(p)
            elif abs(cur_c[p]) > 1e-9 * cscale:
                return None  # free direction with cost: face is unbounded
        if len(live) < len(cur_c):
            x_map = x_map[:, live]
            cur_fs = [cur_fs[p] for p in live]
            cur_c = cur_c[live]
        reduced = True
    if not reduced:
        return None

    alive = [b for b in range(nblocks) if cur_f0[b].shape[0] > 0]
    mred = len(cur_c)
    if mred and alive:
        try:
            deep = _ipm(
                [cur_f0[b] for b in alive],
                [[cur_fs[p][b] for b in alive] for p in range(mred)],
                cur_c,
                opts,
            )
        except SolverError:
            return None
        z = deep["x"]
        red_res = deep["residuals"]
        red_status = deep["status"]
        pos = {b: i for i, b in enumerate(alive)}
        x_red = [deep["X"][pos[b]] if b in pos else np.zeros((0, 0)) for b in range(nblocks)]
        y_red = [deep["Y"][pos[b]] if b in pos else np.zeros((0, 0)) for b in range(nblocks)]
        iters, trace = deep["iterations"], deep["trace"]
    else:
        # x is fully determined; the face itself decides feasibility
        z = np.zeros(0)
        feas = all(
            float(np.linalg.eigvalsh(cur_f0[b]).max()) <= opts.tol
            for b in range(nblocks)
            if cur_f0[b].size
        )
        red_status = "optimal" if feas else "infeasible_suspect"
        red_res = {"primal": 0.0, "dual": 0.0, "gap": 0.0}
        x_red = [np.maximum(-cur_f0[b], 0.0) for b in range(nblocks)]
        y_red = [np.zeros((cur_f0[b].shape[0],) * 2) for b in range(nblocks)]
        iters, trace = 0, []

    x_full = x_part + x_map @ z
    x_exp = [bases[b] @ x_red[b] @ bases[b].T for b in range(nblocks)]
    y_exp = [bases[b] @ y_red[b] @ bases[b].T for b in range(nblocks)]
    rp = [
        sum(x_full[p] * fs[p][b] for p in range(m)) - f0[b] - x_exp[b]
        for b in range(nblocks)
    ]
    pinf = _frob(rp) / (1.0 + _frob(f0))
    pobj = float(c @ x_full)
    dobj = deep["dobj"] if mred and alive else pobj
    res = {"primal": pinf, "dual": red_res["dual"], "gap": red_res["gap"]}
    status = red_status if max(res.values()) <= opts.tol or red_status != "optimal" else "max_iter"
    return {
        "status": status,
        "x": x_full,
        "X": x_exp,
        "Y": y_exp,
        "pobj": pobj,
        "dobj": dobj,
        "residuals": res,
        "iterations": iters,
        "trace": trace,
        "facial": True,
    }


def _admm(f0, fs, c, opts: SolveOptions) -> dict:
    """Splitting fallback on the (D) side: max tr(F_0 Y), tr(F_p Y) = c_p, Y psd.

    Alternating-direction iteration on an augmented Lagrangian (the
    boundary-point scheme): the affine update is a constant-factorization
    linear solve through the Gram matrix of the F_p, the cone update is one
    eigendecomposition per block.  X = -sigma*W and Z stay psd with <X, Z> = 0
    by construction, so only the two feasibility residuals have to converge.
    Much slower than the interior-point iteration but unaffected by a
    nonattained (D) optimum, which is where path-following stalls.
    """
    nblocks = len(f0)
    sizes = [f0[b].shape[0] for b in range(nblocks)]
    m = len(c)
    stacks = [np.stack([fs[p][b] for p in range(m)]) for b in range(nblocks)]
    flat = [stacks[b].reshape(m, -1) for b in range(nblocks)]
    gram = sum(flat[b] @ flat[b].T for b in range(nblocks))
    factor = scipy.linalg.cho_factor(np.eye(m) + gram)

    def apply_a(blocks):
        return sum(flat[b] @ blocks[b].ravel() for b in range(nblocks))

    def apply_at(vec):
        return [np.tensordot(vec, stacks[b], axes=(0, 0)) for b in range(nblocks)]

    def psd_split(mat):
        vals, vecs = np.linalg.eigh(mat)
        pos = vecs[:, vals > 0.0] * vals[vals > 0.0]
        plus = pos @ vecs[:, vals > 0.0].T
        plus = (plus + plus.T) / 2.0
        return plus, mat - plus

    sigma = max(1.0, float(np.max(np.abs(c)))) / max(1.0, _frob(f0))
    z = [np.zeros((s, s)) for s in sizes]
    w = [np.zeros((s, s)) for s in sizes]
    u = np.zeros(m)
    f0_norm = 1.0 + _frob(f0)
    c_norm = 1.0 + float(np.max(np.abs(c)))
    trace: list[tuple] = []
    pinf = dinf = gap = np.inf
    pobj = dobj = 0.0
    it = 0
    for it in range(1, opts.refine_iters + 1):
        d = c - u
        r = [f0[b] / sigma + z[b] - w[b] for b in range(nblocks)]
        corr = d - scipy.linalg.cho_solve(factor, apply_a(r) + gram @ d)
        at_corr = apply_at(corr)
        y = [r[b] + at_corr[b] for b in range(nblocks)]
        u = u + apply_a(y) - c
        shift = 0.0
        z_new, w_new = [], []
        for b in range(nblocks):
            plus, minus = psd_split(y[b] + w[b])
            shift += float(np.sum((plus - z[b]) ** 2))
            z_new.append(plus)
            w_new.append(minus)
        z, w = z_new, w_new

        pinf = sigma * np.sqrt(shift) / f0_norm
        dinf = float(np.max(np.abs(apply_a(z) - c))) / c_norm
        pobj = sigma * float(c @ u)
        dobj = sum(float(np.sum(f0[b] * z[b])) for b in range(nblocks))
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        if it % 500 == 0 or max(pinf, dinf, gap) <= 0.9 * opts.tol:
            trace.append((it, pobj, dobj, pinf, dinf, gap, sigma))
        if max(pinf, dinf, gap) <= 0.9 * opts.tol:
            break
        if sum(float(np.trace(zb)) for zb in z) > 1e13:
            break
        if it % 20 == 0:
            if dinf > 10.0 * pinf and sigma < 1e6:
                u = u / 2.0
                w = [wb / 2.0 for wb in w]
                sigma *= 2.0
            elif pinf > 10.0 * dinf and sigma > 1e-6:
                u = u * 2.0
                w = [wb * 2.0 for wb in w]
                sigma /= 2.0

    return {
        "status": "max_iter",
        "x": sigma * u,
        "X": [-sigma * wb for wb in w],
        "Y": z,
        "pobj": pobj,
        "dobj": dobj,
        "residuals": {"primal": pinf, "dual": dinf, "gap": gap},
        "iterations": it,
        "trace": trace,
    }


def solve_standard(
    form: StandardForm, opts: SolveOptions = SolveOptions(), seed_cuts=None
) -> dict:
    """Solve one standard-form instance robustly.

    Three rescue mechanisms wrap the core iteration.  First, each block is
    restricted to the common range of its coefficient matrices: equality rows
    force every feasible moment matrix onto that face, and without the
    restriction the primal has no interior.  Second, relaxations of problems
    whose feasible set is a low-dimensional variety often have *unattained*
    duals; the Y iterates then diverge.  A tiny perturbation c -> c + eps tr(F_p)
    expands the dual cone just enough to restore attainment; the result is then
    re-checked against the unperturbed data, so a returned "optimal" status is
    always a statement about the original problem.  Third, if path-following
    still stalls, a boundary-point splitting pass (_admm) runs on the same
    reduced data; it trades speed for indifference to dual nonattainment.

    seed_cuts optionally carries known forced-kernel directions per original
    block; they are handed to the facial rescue as exact first-round cuts.
    """
    if form.total_dim > opts.dim_cap:
        raise ValueError(
            f"total block dimension {form.total_dim} exceeds the cap {opts.dim_cap}"
        )
    orig_sizes = [abs(s) for s in form.block_sizes]
    m = form.m
    dense = _dense_blocks(form)
    c = np.asarray(form.c, dtype=float)
    suspect_seen = False

    def finish(status, x_full, x_blocks, y_blocks, pobj, dobj, res, iters, trace, eps):
        if status != "optimal":
            diverged = suspect_seen or (
                (x_full.size and float(np.max(np.abs(x_full))) > 1e10)
                or sum(float(np.trace(b)) for b in y_blocks) > 1e12
                or sum(float(np.trace(b)) for b in x_blocks) > 1e12
            )
            if diverged:
                status = "infeasible_suspect"
        return {
            "status": status,
            "x": x_full,
            "X": x_blocks,
            "Y": y_blocks,
            "pobj": pobj,
            "dobj": dobj,
            "residuals": res,
            "iterations": iters,
            "trace": trace,
            "perturbation": eps,
        }

    if m == 0:
        xb = [-dense[0][b] for b in range(len(orig_sizes))]
        eig = min(
            (float(np.linalg.eigvalsh(mat).min()) for mat in xb if mat.size), default=0.0
        )
        ok = eig >= -opts.tol
        return finish(
            "optimal" if ok else "infeasible_suspect",
            np.zeros(0),
            xb,
            [np.zeros((s, s)) for s in orig_sizes],
            0.0,
            0.0,
            {"primal": 0.0 if ok else -eig, "dual": 0.0, "gap": 0.0},
            0,
            [],
            0.0,
        )

    packed, bases, red_sizes = _face_reduce(dense, orig_sizes)
    act = [b for b in range(len(orig_sizes)) if red_sizes[b] > 0]
    if not act:
        ok = not np.any(c)
        return finish(
            "optimal" if ok else "infeasible_suspect",
            np.zeros(m),
            [np.zeros((s, s)) for s in orig_sizes],
            [np.zeros((s, s)) for s in orig_sizes],
            0.0,
            0.0,
            {"primal": 0.0, "dual": 0.0 if ok else 1.0, "gap": 0.0},
            0,
            [],
            0.0,
        )
    f0 = [packed[0][b] for b in act]
    fs = [[packed[p + 1][b] for b in act] for p in range(m)]

    tvec = np.array([sum(float(np.trace(mat)) for mat in fs[p]) for p in range(m)])
    eps_unit = 0.1 * opts.tol * (1.0 + float(np.max(np.abs(c)))) / max(
        1.0, float(np.max(np.abs(tvec)))
    )
    best = None
    best_err = np.inf
    eps_used = 0.0
    for attempt, eps in enumerate((0.0, eps_unit, 10.0 * eps_unit, 100.0 * eps_unit)):
        raw = _ipm(f0, fs, c + eps * tvec, opts)
        if raw["status"] == "infeasible_suspect":
            suspect_seen = True
        if eps:
            raw = _recheck(f0, fs, c, raw, opts)
        err = max(raw["residuals"].values())
        if err < best_err:
            best, best_err, eps_used = raw, err, eps
        if raw["status"] == "optimal":
            break
        tr_y = sum(float(np.trace(mat)) for mat in raw["Y"])
        if tr_y < 1e6:
            break  # not a divergence failure; perturbing will not help

    raw = best
    if raw["status"] != "optimal":
        seeds_red = None
        if seed_cuts is not None:
            seeds_red = []
            for b in act:
                q = bases[b]
                vs = []
                for v in seed_cuts[b] if b < len(seed_cuts) else ():
                    vr = q.T @ np.asarray(v, dtype=float)
                    if float(np.linalg.norm(vr)) > 1e-8:
                        vs.append(vr)
                seeds_red.append(vs)
        rescue = _facial_rescue(f0, fs, c, opts, seed_cuts=seeds_red)
        if rescue is not None and (
            rescue["status"] == "optimal"
            or max(rescue["residuals"].values()) < max(raw["residuals"].values())
        ):
            raw, eps_used = rescue, 0.0
    if raw["status"] != "optimal" and opts.refine_iters > 0:
        refined = _recheck(f0, fs, c, _admm(f0, fs, c, opts), opts)
        if max(refined["residuals"].values()) < max(raw["residuals"].values()):
            raw, eps_used = refined, 0.0
    position = {b: idx for idx, b in enumerate(act)}
    x_blocks, y_blocks = [], []
    for b, s in enumerate(orig_sizes):
        if b in position:
            q = bases[b]
            x_blocks.append(q @ raw["X"][position[b]] @ q.T)
            y_blocks.append(q @ raw["Y"][position[b]] @ q.T)
        else:
            x_blocks.append(np.zeros((s, s)))
            y_blocks.append(np.zeros((s, s)))
    return finish(
        raw["status"],
        raw["x"],
        x_blocks,
        y_blocks,
        raw["pobj"],
        raw["dobj"],
        raw["residuals"],
        raw["iterations"],
        raw["trace"],
        eps_used,
    )


def solve_sdp(
    problem: Union[SdpProblem, SosProgram, StandardForm],
    opts: SolveOptions = SolveOptions(),
) -> SdpSolution:
    """Solve a moment SDP, an SOS program, or a raw standard-form instance."""
    if isinstance(problem, SdpProblem):
        compiled = compile_moment(problem, opts)
    elif isinstance(problem, SosProgram):
        compiled = compile_sos(problem, opts)
    elif isinstance(problem, StandardForm):
        compiled = CompiledSdp(problem, "primal", 0.0, {})
    else:
        raise TypeError(f"cannot solve a {type(problem).__name__}")
    raw = solve_standard(compiled.form, opts)
    if raw["status"] != "optimal" and isinstance(problem, SdpProblem):
        extra, _ = _kernel_closure(problem, opts)
        if extra:
            aug = replace(
                problem,
                zero_rows=problem.zero_rows + extra,
                meta=dict(problem.meta, kernel_rows=len(extra)),
            )
            try:
                again = compile_moment(aug, opts)
                raw2 = solve_standard(again.form, opts)
            except ValueError:
                raw2 = None
            if raw2 is not None and (
                raw2["status"] == "optimal"
                or max(raw2["residuals"].values()) < max(raw["residuals"].values())
            ):
                again.form.meta["kernel_rows"] = len(extra)
                compiled, raw = again, raw2
    elif raw["status"] != "optimal" and isinstance(problem, SosProgram):
        seeds = _sos_kernel_hints(problem, compiled.form, opts)
        if seeds is not None:
            raw2 = solve_standard(compiled.form, opts, seed_cuts=seeds)
            if raw2["status"] == "optimal" or max(raw2["residuals"].values()) < max(
                raw["residuals"].values()
            ):
                compiled.form.meta["seed_cuts"] = sum(len(v) for v in seeds)
                raw = raw2
    primal = raw["pobj"] + compiled.offset
    dual = raw["dobj"] + compiled.offset
    if compiled.side == "primal":
        value = primal
        blocks = raw["X"]
        rec = compiled.recover
        if "null_basis" in rec:
            dual_vector = rec["y_particular"] + rec["null_basis"] @ raw["x"]
        else:
            dual_vector = raw["x"]
    else:
        value = dual
        blocks = raw["Y"]
        rec = compiled.recover
        vec_g = np.array(
            [raw["Y"][b][i, j] for (_, b, i, j) in rec["gram_keys"]]
        )
        dual_vector = rec["pinv"] @ (rec["rvec"] - rec["lmat"] @ vec_g)
    return SdpSolution(
        status=raw["status"],
        value=value if raw["status"] != "infeasible_suspect" else None,
        primal_value=primal,
        dual_value=dual,
        blocks=blocks,
        dual_vector=dual_vector,
        residuals=raw["residuals"],
        iterations=raw["iterations"],
        meta=dict(compiled.form.meta, side=compiled.side, offset=compiled.offset),
    )


# -- SDPA sparse format -----------------------------------------------------------


def _fmt(v: float) -> str:
    v = float(v)
    if v == 0.0:
        v = 0.0
    return repr(v)


def export_sdpa(problem: Union[StandardForm, SdpProblem, SosProgram]) -> str:
    """Serialize to SDPA sparse ".dat-s" text, deterministically ordered."""
    if isinstance(problem, SdpProblem):
        form = compile_moment(problem).form
    elif isinstance(problem, SosProgram):
        form = compile_sos(problem).form
    else:
        form = problem
    lines = [
        str(form.m),
        str(len(form.block_sizes)),
        " ".join(str(s) for s in form.block_sizes),
        " ".join(_fmt(v) for v in form.c),
    ]
    for p in range(form.m + 1):
        for (b, i, j) in sorted(form.coeffs[p]):
            v = form.coeffs[p][(b, i, j)]
            if v == 0.0:
                continue
            lines.append(f"{p} {b + 1} {i + 1} {j + 1} {_fmt(v)}")
    return "\n".join(lines) + "\n"


_SEPS = re.compile(r"[,{}()]")


def parse_sdpa(text: str) -> StandardForm:
    """Parse SDPA sparse ".dat-s" text back into a StandardForm."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith('"') or s.startswith("*"):
            continue
        rows.append((lineno, _SEPS.sub(" ", s)))
    if len(rows) < 4:
        raise ValueError("SDPA input needs at least 4 data lines")

    def ints(row, expect=None):
        lineno, s = row
        try:
            vals = [int(t) for t in s.split()]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if expect is not None and len(vals) != expect:
            raise ValueError(f"line {lineno}: expected {expect} integers")
        return vals

    mdim = ints(rows[0], 1)[0]
    nblock = ints(rows[1], 1)[0]
    sizes = ints(rows[2], nblock)
    lineno, s = rows[3]
    try:
        c = [float(t) for t in s.split()]
    except ValueError as exc:
        raise ValueError(f"line {lineno}: {exc}") from None
    if len(c) != mdim:
        raise ValueError(f"line {lineno}: expected {mdim} cost entries")
    coeffs: list[dict] = [dict() for _ in range(mdim + 1)]
    for lineno, s in rows[4:]:
        parts = s.split()
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 'matno block i j value'")
        try:
            p, b, i, j = (int(t) for t in parts[:4])
            v = float(parts[4])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if not 0 <= p <= mdim:
            raise ValueError(f"line {lineno}: matrix index {p} out of range")
        if not 1 <= b <= nblock:
            raise ValueError(f"line {lineno}: block index {b} out of range")
        size = abs(sizes[b - 1])
        if not (1 <= i <= j <= size):
            raise ValueError(f"line {lineno}: entry ({i},{j}) outside upper triangle")
        coeffs[p][(b - 1, i - 1, j - 1)] = v
    return StandardForm(tuple(sizes), np.array(c), tuple(coeffs), {})


# -- hierarchy driver --------------------------------------------------------------


@dataclass(frozen=True)
class HierarchyRow:
    """One relaxation order: rho is the SOS bound, tau the moment bound (rho <= tau)."""

    k: int
    rho: Optional[float]
    tau: Optional[float]
    moment_status: Optional[str]
    sos_status: Optional[str]
    wall_ms: float
    error: Optional[str] = None


@dataclass(frozen=True)
class HierarchyResult:
    rows: tuple[HierarchyRow, ...]
    stagnation_k: Optional[int]
    meta: dict = field(compare=False, default_factory=dict)


def run_hierarchy(
    pop: PopProblem,
    variant: Optional[Union[Variant, str]] = None,
    use_products: bool = False,
    k_min: Optional[int] = None,
    k_max: Optional[int] = None,
    denominator: bool = False,
    opts: SolveOptions = SolveOptions(),
    stagnation_tol: float = 1e-6,
) -> HierarchyResult:
    """Solve both relaxation sides for each order k in range; errors stay per-k."""
    aug = augment_problem(pop, variant, use_products)
    lo = k_min if k_min is not None else max(min_order(aug), 1)
    hi = k_max if k_max is not None else lo + 2
    rows = []
    prev_rho: Optional[float] = None
    stagnation_k: Optional[int] = None
    for k in range(lo, hi + 1):
        start = time.perf_counter()
        try:
            if denominator:
                moment_sdp, sos_prog = build_denominator_sdp(aug, k)
            else:
                moment_sdp = build_moment_sdp(aug, k)
                sos_prog = build_sos_sdp(aug, k)
            moment_sol = solve_sdp(moment_sdp, opts)
            sos_sol = solve_sdp(sos_prog, opts)
            row = HierarchyRow(
                k=k,
                rho=sos_sol.value,
                tau=moment_sol.value,
                moment_status=moment_sol.status,
                sos_status=sos_sol.status,
                wall_ms=(time.perf_counter() - start) * 1000.0,
            )
        except (ValueError, SolverError) as exc:
            row = HierarchyRow(
                k=k,
                rho=None,
                tau=None,
                moment_status=None,
                sos_status=None,
                wall_ms=(time.perf_counter() - start) * 1000.0,
                error=str(exc),
            )
        rows.append(row)
        if (
            stagnation_k is None
            and row.rho is not None
            and prev_rho is not None
            and row.sos_status == "optimal"
            and abs(row.rho - prev_rho) <= stagnation_tol
        ):
            stagnation_k = k
        if row.rho is not None:
            prev_rho = row.rho
    meta = {
        "variant": str(variant) if variant else None,
        "use_products": use_products,
        "denominator": denominator,
        "k_range": (lo, hi),
    }
    return HierarchyResult(tuple(rows), stagnation_k, meta)
