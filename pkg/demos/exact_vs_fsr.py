"""Compare the exact posterior of a discrete prior with its FSR estimate.

Draw a finite dataset from a five-atom prior, build the FSR posterior from
it, and print the TV distance to the exact posterior at a few times.

    python demos/exact_vs_fsr.py
"""

from fsrdiag import FsrModel, NoiseSchedule, tv_distance
from fsrdiag.experiments.targets import find_target

target = find_target("pent_asym__quadratic__y=+1.0900")
schedule = NoiseSchedule()
problem = target.problem(schedule)
x = target.space_grid(600)

for n in (64, 1024, 16384):
    data = target.build_prior().sample(n, seed=7)
    fsr = FsrModel(data, schedule, target.build_measurement(), target.y)
    row = []
    for t in (0.05, 0.2, 0.5):
        row.append(tv_distance(fsr.posterior_density(t, x), problem.posterior_density(t, x), x))
    print(f"N={n:6d}  " + "  ".join(f"t={t}: {v:.4f}" for t, v in zip((0.05, 0.2, 0.5), row)))

