"""Quick check that the extension module imports and its main calls agree."""

import math

import catastrophe as cat

p = cat.ModelParams(1.0, 1.0, 1.0)
assert abs(p.p_up - 0.5) < 1e-15

path = cat.simulate(p, 20.0, init=3, seed=7)
assert path[0] == (0.0, 3)
assert all(t2 > t1 for (t1, _), (t2, _) in zip(path, path[1:]))
assert path == cat.simulate(p, 20.0, init=3, seed=7)

probs = cat.transient_distribution(p, 2.0)
assert abs(sum(probs) - 1.0) < 1e-10
lt = cat.log_tail_probability(p, 2.0, 3)
assert abs(math.exp(lt) - sum(probs[3:])) < 1e-10

assert abs(cat.rate_jk(p, 1.5, 1.0) - (1.5 * math.log(3.0) - 0.5)) < 1e-12
assert cat.rate_i1(p, 1.0) == math.log(2.0)
assert cat.rate_i2(-1.0) == math.inf

spec = cat.ScalingSpec(1.0, 1.0)
assert spec.regime == "linear"
curve = cat.empirical_rate_curve(p, spec, 1.5, [25.0, 50.0])
lo, hi = cat.ldp_sandwich(p, spec, 1.5, 50.0)
assert lo <= curve[1]["log_tail"] <= hi

est = cat.is_estimate_tail(p, spec, 1.5, 25.0, 20000, seed=1)
assert abs(est["log_estimate"] - curve[0]["log_tail"]) < 4 * est["rel_std_err"] + 0.05

pair = cat.simulate_coupled(p, 0, 5, 10.0, seed=3)
assert cat.max_discrepancy(pair) <= 5

frac = cat.lln_sup_check(p, cat.ScalingSpec(1.0, 0.5), 1000.0, 1.0, 500)
assert 0.0 <= frac <= 1.0

try:
    cat.ModelParams(-1.0, 1.0, 1.0)
except ValueError:
    pass
else:
    raise AssertionError("negative lambda accepted")

try:
    cat.transient_distribution(p, 100.0, n_states=20)
except RuntimeError:
    pass
else:
    raise AssertionError("truncation failure not raised")

print("smoke test passed")
