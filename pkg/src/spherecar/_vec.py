"""Scalar 3-vector helpers on tuples; faster than numpy for single vectors."""

import math

import numpy as np


def dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def norm(a):
    return math.sqrt(dot(a, a))


def triple(a, b, c):
    """<a x b, c>"""
    return dot(cross(a, b), c)


def lin(*terms):
    """Linear combination of (coefficient, vector) pairs."""
    x = y = z = 0.0
    for c, v in terms:
        x += c * v[0]
        y += c * v[1]
        z += c * v[2]
    return (x, y, z)


def columns(g):
    c = np.asarray(g, dtype=float).T.tolist()
    return c[0], c[1], c[2]


def angle_between(a, b):
    return math.atan2(norm(cross(a, b)), dot(a, b))
