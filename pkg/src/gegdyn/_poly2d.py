"""Closed-form value/gradient/Hessian of the two-variable polynomial objectives.

Every function here works elementwise, so ``x`` and ``y`` may be floats or
equally shaped arrays. The compiled kernel carries a C transcription of
:func:`grad`; keep the two in the same operation order so that both
backends produce identical trajectories.

Kinds
-----
QUADRATIC (0)
    ``f = a x^2 + b x y + c y^2`` with ``coeffs = (a, b, c)``.
MULTI (1)
    ``f = f1 (x-1)^2 (y-1)^2 + f2 x^2 y^2`` with
    ``f1 = p x^2 + q y^2 + r x y`` and ``f2 = s x^2 + t y^2 + u x y``;
    ``coeffs = (p, q, r, s, t, u)``.
"""

QUADRATIC = 0
MULTI = 1

KIND_CODES = {"quadratic": QUADRATIC, "multi": MULTI}


def value(kind, c, x, y):
    if kind == QUADRATIC:
        return c[0] * x * x + c[1] * x * y + c[2] * y * y
    f1 = c[0] * x * x + c[1] * y * y + c[2] * x * y
    f2 = c[3] * x * x + c[4] * y * y + c[5] * x * y
    xm = x - 1.0
    ym = y - 1.0
    return f1 * (xm * xm) * (ym * ym) + f2 * (x * x) * (y * y)


def grad(kind, c, x, y):
    if kind == QUADRATIC:
        gx = 2.0 * c[0] * x + c[1] * y
        gy = c[1] * x + 2.0 * c[2] * y
        return gx, gy
    xm = x - 1.0
    ym = y - 1.0
    a = xm * xm * (ym * ym)
    b = x * x * (y * y)
    f1 = c[0] * x * x + c[1] * y * y + c[2] * x * y
    f2 = c[3] * x * x + c[4] * y * y + c[5] * x * y
    f1x = 2.0 * c[0] * x + c[2] * y
    f1y = 2.0 * c[1] * y + c[2] * x
    f2x = 2.0 * c[3] * x + c[5] * y
    f2y = 2.0 * c[4] * y + c[5] * x
    ax = 2.0 * xm * (ym * ym)
    ay = 2.0 * ym * (xm * xm)
    bx = 2.0 * x * (y * y)
    by = 2.0 * y * (x * x)
    gx = f1x * a + f1 * ax + f2x * b + f2 * bx
    gy = f1y * a + f1 * ay + f2y * b + f2 * by
    return gx, gy


def hess(kind, c, x, y):
    """Return ``(fxx, fxy, fyy)``."""
    if kind == QUADRATIC:
        return 2.0 * c[0] + 0.0 * x, c[1] + 0.0 * x, 2.0 * c[2] + 0.0 * x
    xm = x - 1.0
    ym = y - 1.0
    a = xm * xm * (ym * ym)
    b = x * x * (y * y)
    ax = 2.0 * xm * (ym * ym)
    ay = 2.0 * ym * (xm * xm)
    bx = 2.0 * x * (y * y)
    by = 2.0 * y * (x * x)
    axx = 2.0 * (ym * ym)
    ayy = 2.0 * (xm * xm)
    axy = 4.0 * xm * ym
    bxx = 2.0 * (y * y)
    byy = 2.0 * (x * x)
    bxy = 4.0 * x * y
    f1 = c[0] * x * x + c[1] * y * y + c[2] * x * y
    f2 = c[3] * x * x + c[4] * y * y + c[5] * x * y
    f1x = 2.0 * c[0] * x + c[2] * y
    f1y = 2.0 * c[1] * y + c[2] * x
    f2x = 2.0 * c[3] * x + c[5] * y
    f2y = 2.0 * c[4] * y + c[5] * x
    fxx = (2.0 * c[0] * a + 2.0 * f1x * ax + f1 * axx
           + 2.0 * c[3] * b + 2.0 * f2x * bx + f2 * bxx)
    fyy = (2.0 * c[1] * a + 2.0 * f1y * ay + f1 * ayy
           + 2.0 * c[4] * b + 2.0 * f2y * by + f2 * byy)
    fxy = (c[2] * a + f1x * ay + f1y * ax + f1 * axy
           + c[5] * b + f2x * by + f2y * bx + f2 * bxy)
    return fxx, fxy, fyy
