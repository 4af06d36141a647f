# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels for the 2d grid solver.

The expression ordering mirrors the numpy fallback exactly so both backends
round identically (no FMA contraction is requested at compile time).
"""

def sor_color_sweep(double[::1] x, int[:, ::1] nbr, double[:, ::1] cof,
                    double[::1] diag, double[::1] rhs, int[::1] ids,
                    double omega):
    """One Gauss-Seidel/SOR pass over the nodes listed in ``ids``."""
    cdef Py_ssize_t m = ids.shape[0]
    cdef Py_ssize_t jj, i
    cdef double s, t
    for jj in range(m):
        i = ids[jj]
        s = cof[i, 0] * x[nbr[i, 0]]
        s = s + cof[i, 1] * x[nbr[i, 1]]
        s = s + cof[i, 2] * x[nbr[i, 2]]
        s = s + cof[i, 3] * x[nbr[i, 3]]
        t = (rhs[i] - s) / diag[i]
        x[i] = (1.0 - omega) * x[i] + omega * t


def apply_operator(double[::1] x, int[:, ::1] nbr, double[:, ::1] cof,
                   double[::1] diag, double[::1] out):
    """out = A x for the assembled 5-point operator."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double s
    for i in range(n):
        s = diag[i] * x[i]
        s = s + cof[i, 0] * x[nbr[i, 0]]
        s = s + cof[i, 1] * x[nbr[i, 1]]
        s = s + cof[i, 2] * x[nbr[i, 2]]
        s = s + cof[i, 3] * x[nbr[i, 3]]
        out[i] = s
