"""Residues of canonical logarithmic extensions from monodromy matrices.

A monodromy m decomposes into generalized eigenblocks; each block carries
log(e)/(2 pi i) Id + N/(2 pi i) with the eigenvalue argument taken in
[0, 2 pi) and N the (nilpotent) log of the unipotent part.  Residue
eigenvalue real parts then lie in [0, 1).  Integer per-block twists shift a
block by -n Id, changing the extension degree by n * dim while preserving
exp(2 pi i Res) = m."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import as_matrix, frob

TWO_PI_I = 2j * np.pi
CLUSTER_RTOL = 1e-7
MONODROMY_TOL = 1e-8


class ResidueError(ValueError):
    pass


@dataclass
class EigenBlock:
    eigenvalue: complex
    log_choice: complex
    nilpotent: np.ndarray
    basis: np.ndarray
    dim: int

    def residue_block(self) -> np.ndarray:
        return (self.log_choice * np.eye(self.dim, dtype=complex) + self.nilpotent) / TWO_PI_I


@dataclass
class ResidueData:
    blocks: list
    residue_matrix: np.ndarray
    normalized: bool = True  # real parts in [0, 1); twisting waives this
    shifts: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.residue_matrix.shape[0]

    def eigenvalue_real_parts(self) -> np.ndarray:
        return np.sort(np.linalg.eigvals(self.residue_matrix).real)


def _cluster(values, rtol):
    """Group indices of nearly equal complex values (relative tolerance)."""
    clusters = []
    for idx, v in enumerate(values):
        for cl in clusters:
            ref = cl["value"]
            if abs(v - ref) <= rtol * max(1.0, abs(ref), abs(v)):
                cl["indices"].append(idx)
                cl["value"] = (ref * (len(cl["indices"]) - 1) + v) / len(cl["indices"])
                break
        else:
            clusters.append({"value": v, "indices": [idx]})
    return clusters


def _log_in_zero_two_pi(e: complex) -> complex:
    ang = float(np.angle(e))
    if ang < 0:
        ang += 2.0 * np.pi
    # roundoff just below the positive real axis belongs to the branch point 0
    if 2.0 * np.pi - ang < 1e-12:
        ang = 0.0
    return complex(np.log(abs(e)), ang)


def _cluster_bases(m, rtol):
    eigvals = np.linalg.eigvals(m)
    clusters = _cluster(eigvals, rtol)
    bases = []
    for cl in clusters:
        ref = cl["value"]
        k = len(cl["indices"])
        # sorted Schur form puts the cluster's invariant subspace up front
        _, qs, sdim = scipy.linalg.schur(
            m,
            output="complex",
            sort=lambda x, ref=ref: abs(x - ref) <= rtol * max(1.0, abs(ref), abs(x)),
        )
        if sdim != k:
            raise ResidueError(
                f"eigenvalue clustering is inconsistent near {ref}: separation too small"
            )
        bases.append((cl, qs[:, :k]))
    stacked = np.hstack([b for _, b in bases])
    return bases, stacked, float(np.linalg.cond(stacked))


def deligne_residue(m) -> ResidueData:
    """Residue data of the canonical extension for monodromy m.

    Eigenvalues within 1e-7 relative distance form one generalized block; when
    that leaves numerically inseparable blocks (defective spectra perturb
    their eigenvalues by roughly eps^(1/r)), the clustering is coarsened in
    steps before reporting the achieved separation as an error."""
    m = as_matrix(m)
    r = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise ResidueError("monodromy matrix must be square")
    eigvals = np.linalg.eigvals(m)
    if np.min(np.abs(eigvals)) < 1e-12 * max(1.0, float(np.max(np.abs(eigvals)))):
        raise ResidueError("monodromy is numerically singular")

    last_exc = None
    bases = stacked = None
    for rtol in (CLUSTER_RTOL, 1e-5, 1e-3):
        try:
            bases, stacked, cond = _cluster_bases(m, rtol)
        except ResidueError as exc:
            last_exc = exc
            continue
        if cond <= 1e8:
            break
        last_exc = ResidueError(
            f"generalized eigenspaces numerically inseparable at clustering {rtol:.0e} "
            f"(basis condition {cond:.2e})"
        )
        bases = None
    if bases is None:
        raise last_exc
    s_inv = np.linalg.inv(stacked)
    transformed = s_inv @ m @ stacked

    blocks = []
    offset = 0
    res_blocks = np.zeros((r, r), dtype=complex)
    for cl, basis in bases:
        k = basis.shape[1]
        sub = transformed[offset : offset + k, offset : offset + k]
        e = complex(cl["value"])
        log_e = _log_in_zero_two_pi(e)
        nilp = scipy.linalg.logm(sub / e)
        blocks.append(EigenBlock(e, log_e, nilp, basis, k))
        res_blocks[offset : offset + k, offset : offset + k] = (
            log_e * np.eye(k, dtype=complex) + nilp
        ) / TWO_PI_I
        offset += k

    residue = stacked @ res_blocks @ s_inv
    return ResidueData(blocks, residue)


def extension_degree(datas) -> float:
    """-sum of the real parts of the residue eigenvalues over all punctures."""
    total = 0.0
    for data in datas:
        total -= float(np.sum(np.linalg.eigvals(data.residue_matrix).real))
    return total


def rhd_twist(data: ResidueData, shifts) -> ResidueData:
    """Tensor each eigenblock by the n-th power of the point bundle: the block
    residue drops by n Id (log choice by 2 pi i n); monodromy is unchanged."""
    shifts = [int(s) for s in shifts]
    if len(shifts) != len(data.blocks):
        raise ResidueError(
            f"need one shift per block: got {len(shifts)} for {len(data.blocks)} blocks"
        )
    blocks = []
    for b, n in zip(data.blocks, shifts):
        blocks.append(
            EigenBlock(b.eigenvalue, b.log_choice - TWO_PI_I * n, b.nilpotent, b.basis, b.dim)
        )
    stacked = np.hstack([b.basis for b in blocks])
    s_inv = np.linalg.inv(stacked)
    r = data.dim
    res_blocks = np.zeros((r, r), dtype=complex)
    offset = 0
    for b in blocks:
        res_blocks[offset : offset + b.dim, offset : offset + b.dim] = b.residue_block()
        offset += b.dim
    residue = stacked @ res_blocks @ s_inv
    normalized = data.normalized and all(n == 0 for n in shifts)
    return ResidueData(blocks, residue, normalized, list(data.shifts) + [tuple(shifts)])


def verify_monodromy(data: ResidueData, m, tol: float = MONODROMY_TOL) -> bool:
    """exp(2 pi i Res) must reproduce the monodromy."""
    m = as_matrix(m)
    if m.shape != data.residue_matrix.shape:
        raise ResidueError("shape mismatch between residue data and monodromy")
    recon = scipy.linalg.expm(TWO_PI_I * data.residue_matrix)
    return frob(recon - m) <= tol * max(1.0, frob(m))


def flag_restricted_residues(m, flag) -> list:
    """Residue data on each flag subspace: the boundary filtration's sub-local
    systems carry the restricted monodromy, so their extension residues are
    the residues of the compressions (level 0 = the full space first)."""
    from .linalg import membership_residual, orthonormal_basis

    m = as_matrix(m)
    if membership_residual(m, flag) > MONODROMY_TOL:
        raise ResidueError("monodromy does not preserve the flag")
    out = [deligne_residue(m)]
    for b in flag.subspaces:
        q = orthonormal_basis(b)
        out.append(deligne_residue(q.conj().T @ m @ q))
    return out
