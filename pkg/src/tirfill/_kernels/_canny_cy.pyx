# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the edge-detection hot loops (see _canny_np for the
reference semantics; the two must stay bit-identical)."""

from libc.math cimport atan2, fmod, M_PI

import numpy as np

BACKEND_NAME = "compiled"


def nms(double[:, ::1] mag, double[:, ::1] gx, double[:, ::1] gy):
    cdef Py_ssize_t h = mag.shape[0]
    cdef Py_ssize_t w = mag.shape[1]
    out_arr = np.zeros((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if h < 3 or w < 3:
        return out_arr

    cdef Py_ssize_t y, x
    cdef double m, deg, ahead, behind
    cdef int dy, dx
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            m = mag[y, x]
            if m <= 0.0:
                continue
            deg = fmod(atan2(gy[y, x], gx[y, x]) * 180.0 / M_PI, 180.0)
            if deg < 0.0:
                deg += 180.0
            if deg < 22.5 or deg >= 157.5:
                dy = 0; dx = 1
            elif deg < 67.5:
                dy = 1; dx = 1
            elif deg < 112.5:
                dy = 1; dx = 0
            else:
                dy = 1; dx = -1
            ahead = mag[y + dy, x + dx]
            behind = mag[y - dy, x - dx]
            if m > behind and m >= ahead:
                out[y, x] = m
    return out_arr


def hysteresis(double[:, ::1] smag, double low, double high):
    cdef Py_ssize_t h = smag.shape[0]
    cdef Py_ssize_t w = smag.shape[1]
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    stack_arr = np.empty(h * w, dtype=np.intp)
    cdef Py_ssize_t[::1] stack = stack_arr

    cdef Py_ssize_t y, x, ny, nx, y2, x2, top, idx
    cdef int dy, dx
    top = 0
    for y in range(h):
        for x in range(w):
            if smag[y, x] >= high and out[y, x] == 0:
                out[y, x] = 1
                stack[top] = y * w + x
                top += 1
                while top > 0:
                    top -= 1
                    idx = stack[top]
                    ny = idx // w
                    nx = idx - ny * w
                    for dy in range(-1, 2):
                        for dx in range(-1, 2):
                            if dy == 0 and dx == 0:
                                continue
                            y2 = ny + dy
                            x2 = nx + dx
                            if 0 <= y2 < h and 0 <= x2 < w:
                                if out[y2, x2] == 0 and smag[y2, x2] >= low:
                                    out[y2, x2] = 1
                                    stack[top] = y2 * w + x2
                                    top += 1
    return out_arr
