"""Run the verification suite on the default ring and print the scoreboard.

Each check certifies one qualitative property of the solved minimal graph
(oracle agreement, gradient bounds, supersolution domination, tau scaling,
convexity and rank, monotonicity, boundary gradient growth).  A check passes
when its margin is nonnegative; tolerances already include the 10 h^2 slack
that discretization is entitled to.
"""

from convexring import run_suite

reports = run_suite(oracle_grid_sizes=(33, 65, 129))

width = max(len(r.name) for r in reports)
print(f"{'check':<{width}}  {'result':<6}  {'margin':>12}  {'tolerance':>10}  time")
for r in reports:
    status = "pass" if r.passed else "FAIL"
    print(f"{r.name:<{width}}  {status:<6}  {r.margin:>12.6f}  "
          f"{r.tolerance:>10.4g}  {r.runtime_s:5.2f}s")

print()
if all(r.passed for r in reports):
    print("all checks passed")
else:
    for r in reports:
        if not r.passed:
            print(f"FAILED: {r.name}: {r.claim}")
            print(f"  extras: {r.extras}")
