"""Independent symbolic reference values (sympy), frozen into tests/oracle_values.py.

Nothing here imports georigid: metrics are written out from their closed forms and
differentiated symbolically.

    python3 scripts/derive_oracles.py > tests/oracle_values.py
"""
import sympy as sp


def christoffel(g, xs):
    n = len(xs)
    ginv = g.inv()
    return [[[(sum(ginv[i, m] * (sp.diff(g[m, j], xs[k]) + sp.diff(g[m, k], xs[j])
                                             - sp.diff(g[j, k], xs[m])) for m in range(n)) / 2)
              for k in range(n)] for j in range(n)] for i in range(n)]


def riemann(Gam, xs):
    # R^i_jkl = d_k G^i_lj - d_l G^i_kj + G^i_km G^m_lj - G^i_lm G^m_kj
    n = len(xs)
    R = {}
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    R[i, j, k, l] = (sp.diff(Gam[i][l][j], xs[k]) - sp.diff(Gam[i][k][j], xs[l])
                                     + sum(Gam[i][k][m] * Gam[m][l][j] - Gam[i][l][m] * Gam[m][k][j]
                                           for m in range(n)))
    return R


def schwarzschild_values():
    t, r, th, ph = xs = sp.symbols("t r th ph")
    m = 1
    f = 1 - 2 * m / r
    g = sp.diag(-f, 1 / f, r ** 2, r ** 2 * sp.sin(th) ** 2)
    Gam = christoffel(g, xs)
    R = riemann(Gam, xs)
    pt = {t: 0, r: 4, th: sp.pi / 2, ph: 0}
    ric = sp.Matrix(4, 4, lambda j, l: sum(R[i, j, i, l] for i in range(4)))
    gam = {f"{i}{j}{k}": float(Gam[i][j][k].subs(pt)) for i in range(4) for j in range(4) for k in range(j, 4)
           if Gam[i][j][k].subs(pt) != 0}
    riem = {key: float(R[key].subs(pt)) for key in [(0, 1, 0, 1), (0, 2, 0, 2), (1, 2, 1, 2),
                                                               (2, 3, 2, 3)]}
    return gam, riem, max(abs(float(c.subs(pt))) for c in ric)


def stereo_values(n, x0):
    xs = sp.symbols(f"x1:{n + 1}")
    s = sum(x ** 2 for x in xs)
    g = sp.eye(n) * 4 / (1 + s) ** 2
    Gam = christoffel(g, xs)
    R = riemann(Gam, xs)
    ginv = g.inv()
    ric = sp.Matrix(n, n, lambda j, l: sum(R[i, j, i, l] for i in range(n)))
    pt = dict(zip(xs, x0))
    return float(sum(ginv[j, l].subs(pt) * ric[j, l].subs(pt) for j in range(n) for l in range(n)))


def beltrami_values(A, x0):
    n = len(x0)
    xs = sp.symbols(f"x1:{n + 1}")
    s = sum(x ** 2 for x in xs)
    # inverse stereographic projection from the south pole chart used by the catalog
    y = sp.Matrix([2 * x / (1 + s) for x in xs] + [(1 - s) / (1 + s)])
    w = sp.Matrix(A) * y
    F = w / sp.sqrt((w.T * w)[0])
    Jf = F.jacobian(xs)
    gbar = Jf.T * Jf
    g = sp.eye(n) * 4 / (1 + s) ** 2
    pt = dict(zip(xs, x0))
    gb0 = gbar.subs(pt).evalf(30)
    g0 = g.subs(pt).evalf(30)
    dgb = [gbar.diff(x).subs(pt).evalf(30) for x in xs]
    dg = [g.diff(x).subs(pt).evalf(30) for x in xs]
    phi = (sp.log(abs(gb0.det())) - sp.log(abs(g0.det()))) / (2 * (n + 1))
    dphi = [((gb0.inv() * dgb[k]).trace() - (g0.inv() * dg[k]).trace()) / (2 * (n + 1)) for k in range(n)]
    a = sp.exp(2 * phi) * g0 * gb0.inv() * g0
    lam = (g0.inv() * a).trace() / 2
    lam_i = -sp.exp(2 * phi) * sp.Matrix([dphi]) * gb0.inv() * g0
    return ([[float(v) for v in row] for row in gb0.tolist()], float(phi), [float(v) for v in dphi],
            float(lam), [float(v) for v in lam_i])


def main():
    gam, riem, ric = schwarzschild_values()
    print('"""Reference values from scripts/derive_oracles.py (sympy); regenerate rather than edit."""')
    print()
    print("# schwarzschild, m = 1, at (t, r, th, ph) = (0, 4, pi/2, 0)")
    print(f"SCHW_CHRISTOFFEL = {gam!r}")
    print(f"SCHW_RIEMANN = {riem!r}")
    print(f"SCHW_RICCI_MAX = {ric!r}")
    print()
    print("# unit round sphere, stereographic chart")
    print(f"SPHERE2_R_ORIGIN = {stereo_values(2, (0, 0))!r}")
    print(f"SPHERE3_R = {stereo_values(3, (sp.Rational(3, 10), sp.Rational(-1, 5), sp.Rational(1, 10)))!r}")
    print()
    x0 = (sp.Rational(1, 10), sp.Rational(-1, 5), sp.Rational(3, 10), sp.Rational(1, 20))
    gb, phi, dphi, lam, lam_i = beltrami_values(sp.diag(2, 1, 1, 1, 1), x0)
    print("# beltrami pullback, A = diag(2,1,1,1,1), dim 4, at x0")
    print(f"BELTRAMI_X0 = {tuple(float(v) for v in x0)!r}")
    print(f"BELTRAMI_GBAR = {gb!r}")
    print(f"BELTRAMI_PHI = {phi!r}")
    print(f"BELTRAMI_DPHI = {dphi!r}")
    print(f"BELTRAMI_LAMBDA = {lam!r}")
    print(f"BELTRAMI_LAMBDA_I = {lam_i!r}")


if __name__ == "__main__":
    main()
