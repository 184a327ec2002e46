"""Independent high-precision oracles for frozen test values.

Run with `python3 tests/oracles/oracles.py`. Values printed here are pasted
into the C++ tests; the C++ implementation never calls this script.
"""
import mpmath as mp
import sympy as sp

mp.mp.dps = 40
x, y, q1, p1, p2, s, t = sp.symbols("x y q1 p1 p2 s t", positive=True)


def section(title):
    print(f"\n== {title}")


section("expr derivatives")
f = x + y + x**2 * y
print("d/dx f at (1,1):", sp.diff(f, x).subs({x: 1, y: 1}))
print("d/dy d/dx ln(1+2xy) at (1,1):", sp.diff(sp.log(1 + 2 * x * y), x, y).subs({x: 1, y: 1}))

section("chern curvature")
L = sp.log(sp.diff(f, x) / sp.diff(f, y))
Lxy = sp.simplify(sp.diff(L, x, y))
K = -Lxy / (sp.diff(f, x) * sp.diff(f, y))
print("L_xy(1,1) =", sp.nsimplify(Lxy.subs({x: 1, y: 1})))
print("K(1,1) =", sp.nsimplify(K.subs({x: 1, y: 1})))
# worst |K| over the 5x5 interior probe grid on [0.5,1.5]^2
fl = sp.lambdify((x, y), K, "mpmath")
pts = [0.5 + (i + 1) / 6 for i in range(5)]
print("max|K| on 5x5 probes [0.5,1.5]^2 =", max(abs(fl(a, b)) for a in pts for b in pts))


def thomsen(fexpr, x0, y0, x1, x2):
    F = sp.lambdify((x, y), fexpr, "mpmath")
    solve = lambda xa, target, guess: mp.findroot(lambda v: F(xa, v) - target, guess)
    y1 = solve(x0, F(x1, y0), y0)
    y2 = solve(x1, F(x2, y1), y1)
    y2p = solve(x0, F(x2, y0), y2)
    return y1, y2, y2p, y2p - y2


section("thomsen gap x+y+x^2 y")
y1, y2, y2p, gap = thomsen(f, mp.mpf(1), mp.mpf(1), mp.mpf("1.1"), mp.mpf("1.2"))
print("y1 =", y1, "y2 =", y2, "y2' =", y2p, "gap =", gap)
for eps in ["0.1", "0.05", "0.025", "0.0125"]:
    e = mp.mpf(eps)
    print("  eps", eps, "gap", thomsen(f, mp.mpf(1), mp.mpf(1), 1 + e, 1 + 2 * e)[3])

section("hotelling Pi = 1/(p1 p2)")
Pi = 1 / (p1 * p2)
q1e = -sp.diff(Pi, p1)
q2e = -sp.diff(Pi, p2)
p2sol = sp.solve(sp.Eq(q1, q1e), p2)[0]
q2map = sp.simplify(q2e.subs(p2, p2sol))
print("p2 =", p2sol, " q2 =", q2map)
det = sp.simplify(sp.diff(q2map, q1) * sp.diff(p2sol, p1) - sp.diff(q2map, p1) * sp.diff(p2sol, q1))
print("det =", det)

section("perturbed hotelling, bump p1*q1")
for size in [sp.Rational(1, 10), sp.Rational(1, 20), sp.Rational(1, 40)]:
    q2p = q2map * (1 + size * p1 * q1)
    a = sp.simplify(sp.diff(q2p, q1) * sp.diff(p2sol, p1) - sp.diff(q2p, p1) * sp.diff(p2sol, q1))
    sam = sp.simplify(sp.diff(sp.log(-a), q1, p1))
    tay = sp.simplify(a * sp.diff(a, q1, p1) - sp.diff(a, q1) * sp.diff(a, p1))
    at = {q1: 1, p1: 1}
    print(f"size {size}: a = {a}; a(1,1) = {a.subs(at)}; lagr(1,1) = {(a + 1).subs(at)};"
          f" sam(1,1) = {sp.nsimplify(sam.subs(at))} = {sp.N(sam.subs(at), 17)}; taylor = {tay}")

section("area ratio, perturbed size 0.1, base (1,1)")
c = sp.Rational(1, 5)
a_abs = 1 + c * q1 * p1


def A(e, d):
    return sp.integrate(sp.integrate(a_abs, (p1, 1, 1 + d)), (q1, 1, 1 + e))


for e in [sp.Rational(1, 10), sp.Rational(1, 20), sp.Rational(1, 40)]:
    r = abs(A(e, e) * A(-e, -e) / (A(e, -e) * A(-e, e))) - 1
    print(f"eps=delta={e}: deviation = {sp.N(abs(r), 17)}")

section("taylor residual for a = 1 + q1 p1")
a2 = 1 + q1 * p1
print((a2 * sp.diff(a2, q1, p1) - sp.diff(a2, q1) * sp.diff(a2, p1)).subs({q1: 1, p1: 1}))

section("transversality flip: bump -p1*q1, size 1/2")
q2f = q2map * (1 - sp.Rational(1, 2) * p1 * q1)
af = sp.simplify(sp.diff(q2f, q1) * sp.diff(p2sol, p1) - sp.diff(q2f, p1) * sp.diff(p2sol, q1))
print("a =", af, " zero set: p1*q1 =", sp.solve(sp.Eq(af, 0), q1))

for bump in [p1 * q1 + q1**2, p1 * q1]:
    section(f"hexagon on density, perturbed bump {bump} size 0.1")
    q2h = q2map * (1 + sp.Rational(1, 10) * bump)
    ah = sp.simplify(sp.diff(q2h, q1) * sp.diff(p2sol, p1) - sp.diff(q2h, p1) * sp.diff(p2sol, q1))
    print("a =", ah)
    dens = sp.simplify(-ah).subs({q1: x, p1: y})
    print("(ln|a|)_{q1p1}(1,1) =", sp.N(sp.diff(sp.log(dens), x, y).subs({x: 1, y: 1}), 17))
    r = thomsen(dens, mp.mpf(1), mp.mpf("0.9"), mp.mpf("1.02"), mp.mpf("1.04"))
    print("quadruple (1,0.9,1.02,1.04): y1,y2,y2' =", r[0], r[1], r[2], " gap =", r[3])

section("hexagon on density, product form a=(1+q1)e^p1")
print("gap =", thomsen((1 + x) * sp.exp(y), mp.mpf("0.2"), mp.mpf("0.2"), mp.mpf("0.3"), mp.mpf("0.4"))[3])
