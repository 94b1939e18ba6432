from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp

from parsreduce.sdp import SdpProblem


FREE_MARKER = "*free_split"


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_sdpa(filename: Union[str, Path], prob: SdpProblem, title: str = "parsreduce"):
    """
    Write prob in SDPA sparse format.

    SDPA states its problem as

        max  tr(F0 Y)
        s.t. tr(Fi Y) = ci,  Y PSD

    which is our primal with Fi = A_i, ci = b_i and F0 = -C. SDPA has no free
    variables, so free scalars are written as a split LP block x = x+ - x- and
    flagged with a '*free_split k' comment that read_sdpa understands.

    Only upper triangle entries are written.
    """
    nf = prob.num_free
    dims = list(prob.block_sizes) + ([-2 * nf] if nf else [])
    lines = [f'"{title}']
    if nf:
        lines.append(f"{FREE_MARKER} {nf}")
    lines.append(str(prob.num_rows))
    lines.append(str(len(dims)))
    lines.append(" ".join(str(d) for d in dims))
    lines.append(" ".join(_fmt(v) for v in prob.b) if prob.num_rows else "")

    def entries(matno, coeffs):
        # coeffs: dense scalar coefficient vector in our indexing
        out = []
        for j, s in enumerate(prob.block_sizes):
            iu_r, iu_c = np.triu_indices(s)
            seg = coeffs[prob.block_offsets[j]:prob.block_offsets[j + 1]]
            for k in np.nonzero(seg)[0]:
                r, c = iu_r[k], iu_c[k]
                v = seg[k] if r == c else 0.5 * seg[k]
                out.append(f"{matno} {j + 1} {r + 1} {c + 1} {_fmt(v)}")
        if nf:
            blk = len(prob.block_sizes) + 1
            seg = coeffs[prob.num_psd_scalars:]
            for k in np.nonzero(seg)[0]:
                out.append(f"{matno} {blk} {2 * k + 1} {2 * k + 1} {_fmt(seg[k])}")
                out.append(f"{matno} {blk} {2 * k + 2} {2 * k + 2} {_fmt(-seg[k])}")
        return out

    lines.extend(entries(0, -prob.c))
    A = sp.csr_matrix(prob.A)
    for i in range(prob.num_rows):
        lines.extend(entries(i + 1, A.getrow(i).toarray().ravel()))

    with open(filename, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_sdpa(filename: Union[str, Path]) -> SdpProblem:
    """
    Read an SDPA sparse file. LP blocks (negative dimension) become 1x1 PSD blocks,
    unless the file carries the '*free_split' marker written by write_sdpa, in which
    case the trailing LP block is folded back into free scalars.
    """
    with open(filename) as f:
        my_file = [ln.rstrip("\n") for ln in f]

    num_free = 0
    offset = 0
    for ln in my_file:
        if ln[:1] in ('"', "*"):
            if ln.startswith(FREE_MARKER):
                num_free = int(ln.split()[1])
            offset += 1
        else:
            break

    m = int(my_file[offset].split()[0])
    nblocks = int(my_file[offset + 1].split()[0])
    dims = [int(d) for d in my_file[offset + 2].replace(",", " ").replace("{", " ").replace("}", " ").split()]
    if len(dims) != nblocks:
        raise ValueError(f"{filename}: expected {nblocks} block dimensions, got {len(dims)}")
    b = np.array([float(v) for v in my_file[offset + 3].replace(",", " ").split()]) if m else np.zeros(0)
    if len(b) != m:
        raise ValueError(f"{filename}: expected {m} right-hand side values, got {len(b)}")

    # map SDPA (block, i, j) to our scalar index
    block_sizes = []
    block_map = {}  # sdpa block -> ("psd", our block) | ("lp", first our block) | ("free",)
    for k, d in enumerate(dims):
        if d > 0:
            block_map[k + 1] = ("psd", len(block_sizes))
            block_sizes.append(d)
        elif num_free and k == nblocks - 1:
            if -d != 2 * num_free:
                raise ValueError(f"{filename}: free_split block has size {-d}, expected {2 * num_free}")
            block_map[k + 1] = ("free",)
        else:
            block_map[k + 1] = ("lp", len(block_sizes))
            block_sizes.extend([1] * (-d))

    prob = SdpProblem(block_sizes, num_free, sp.csr_matrix((m, _num_scalars(block_sizes, num_free))), b)

    rows, cols, vals = [], [], []
    c = np.zeros(prob.num_scalars)
    for ln in my_file[offset + 4:]:
        if not ln.strip():
            continue
        matno, blk, i, j, v = ln.split()
        matno, blk, i, j, v = int(matno), int(blk), int(i) - 1, int(j) - 1, float(v)
        kind = block_map[blk]
        if kind[0] == "psd":
            idx = prob.entry_index(kind[1], i, j)
            coef = v if i == j else 2.0 * v
        elif kind[0] == "lp":
            if i != j:
                raise ValueError(f"{filename}: off-diagonal entry in LP block {blk}")
            idx = prob.entry_index(kind[1] + i, 0, 0)
            coef = v
        else:
            if i % 2 == 1:
                continue  # negative half of the split pair
            idx = prob.free_index(i // 2)
            coef = v
        if matno == 0:
            c[idx] = -coef
        else:
            rows.append(matno - 1)
            cols.append(idx)
            vals.append(coef)

    A = sp.csr_matrix((vals, (rows, cols)), shape=(m, prob.num_scalars))
    return SdpProblem(block_sizes, num_free, A, b, c)


def _num_scalars(block_sizes, num_free):
    return sum(s * (s + 1) // 2 for s in block_sizes) + num_free
