"""Design the next batch of experiments for the bundled study.

Solves the two-stage weighted design problem on the 10x10 candidate grid with
the six initial experiments as the prior stage, prints the epsilon-optimality
certificate, and converts the weighted design into a three-experiment batch.
"""

from seqoed import Criterion, TwoStageContext, select_batch, sieve, solve_weighted
from seqoed.casestudy import (
    THETA_TOT,
    case_study_model,
    measurement_noise,
    oed_grid,
    stage_design,
)

model = case_study_model()
noise = measurement_noise()
space = oed_grid()
prior = stage_design("init", actual=True)

ctx = TwoStageContext(prior_design=prior, alpha=0.5, theta_ref=THETA_TOT, criterion=Criterion.D)
report = solve_weighted(ctx, space, model, noise, epsilon=5e-5)

print(f"solved in {report.iterations} refinements; "
      f"criterion value {report.criterion_value:.4f}")
print(f"certificate: min sensitivity over all {space.size} candidates = "
      f"{report.min_sensitivity:.2e} >= -5e-05")
print("\nweighted design:")
for point, weight in zip(report.design.points, report.design.weights):
    print(f"  l={point[0]:.4f} P={point[1]:9.0f} Pa  weight={weight:.4f}")

survivors = sieve(report.design, min_total_weight=0.95)
print(f"\nsieve keeps {survivors.size} points carrying at least 95% of the weight")
batch = select_batch(ctx, survivors, max_batch_size=3, model=model, noise=noise)
print("batch to run next:")
for point in batch.points:
    print(f"  l={point[0]:.4f} P={point[1]:9.0f} Pa")
