"""Slow, obviously-correct reference implementations used only by the tests."""

import numpy as np


def brute_force_faces(ny, nx):
    """Enumerate faces cell by cell: (interior pairs, boundary count)."""
    interior = set()
    boundary = 0
    for r in range(ny):
        for c in range(nx):
            for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < ny and 0 <= cc < nx:
                    a, b = r * nx + c, rr * nx + cc
                    interior.add((min(a, b), max(a, b)))
                else:
                    boundary += 1
    return interior, boundary


def brute_force_aQ(kappa1, kappa2, sigma, h):
    """Dense TPFA operator for the whole grid built face by face with loops.

    ``kappa*`` and ``sigma`` are ``(n, n)`` arrays indexed ``[row, col]``.
    """
    n = kappa1.shape[0]
    N = n * n
    A = np.zeros((2 * N, 2 * N))
    for i, kappa in enumerate((kappa1, kappa2)):
        off = i * N
        for r in range(n):
            for c in range(n):
                k = r * n + c
                for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < n and 0 <= cc < n:
                        kk = rr * n + cc
                        # flux through face: (h / h) * harmonic mean
                        t = 1.0 / (0.5 / kappa[r, c] + 0.5 / kappa[rr, cc])
                        A[off + k, off + k] += t
                        A[off + k, off + kk] -= t
                    else:
                        # half-cell distance to the Dirichlet face
                        A[off + k, off + k] += kappa[r, c] / 0.5
    for r in range(n):
        for c in range(n):
            k = r * n + c
            s = sigma[r, c] * h * h
            A[k, k] += s
            A[N + k, N + k] += s
            A[k, N + k] -= s
            A[N + k, k] -= s
    return A


def flood_fill_components(mask):
    """4-connected components of a boolean 2-D array via explicit BFS.

    Returns a list of sets of ``(row, col)``.
    """
    ny, nx = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for r in range(ny):
        for c in range(nx):
            if mask[r, c] and not seen[r, c]:
                comp = set()
                stack = [(r, c)]
                seen[r, c] = True
                while stack:
                    a, b = stack.pop()
                    comp.add((a, b))
                    for da, db in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                        aa, bb = a + da, b + db
                        if 0 <= aa < ny and 0 <= bb < nx and mask[aa, bb] and not seen[aa, bb]:
                            seen[aa, bb] = True
                            stack.append((aa, bb))
                comps.append(comp)
    return comps


def dense_kkt_solve(A, B, e):
    """Solve ``[A B^T; B 0] [x; y] = [0; e]`` with dense LU."""
    A = np.asarray(A.todense() if hasattr(A, "todense") else A)
    B = np.asarray(B.todense() if hasattr(B, "todense") else B)
    n, m = A.shape[0], B.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = A
    K[:n, n:] = B.T
    K[n:, :n] = B
    rhs = np.concatenate([np.zeros(n), e])
    sol = np.linalg.solve(K, rhs)
    return sol[:n], sol[n:]


def block_sums(values, n_coarse, refine):
    """Per-block means by explicit loops over blocks."""
    n = n_coarse * refine
    grid = values.reshape(n, n)
    out = np.zeros(n_coarse * n_coarse)
    for R in range(n_coarse):
        for C in range(n_coarse):
            out[R * n_coarse + C] = grid[R * refine : (R + 1) * refine, C * refine : (C + 1) * refine].mean()
    return out
