"""Run each moment-matching sampler on a bimodal mixture prior.

Prints the terminal TV against the exact posterior for every method and the
fraction of samples that reach the right-hand mode.

    python demos/sampler_tv.py
"""

import numpy as np

from fsrdiag import SamplerSpec, ensemble_density, run_sampler, tv_distance
from fsrdiag.experiments.targets import find_target

target = find_target("bi_asym__identity_lownoise__y=+0.3000")
problem = target.problem()
prior, meas = target.build_prior(), target.build_measurement()
x = target.space_grid(600)

spec0 = SamplerSpec("sigma_dps", K=5000, seed=1)
exact = problem.posterior_density(spec0.t_end, x)

for method, extra in [("sigma_dps", {}), ("zeta_dps", {"zeta": 0.3}), ("pgdm", {}), ("tmpd", {})]:
    spec = SamplerSpec(method, K=5000, seed=1, **extra)
    ens = run_sampler(spec, prior, meas, target.y, record="terminal")
    dens = ensemble_density(ens, x).values[-1]
    right = float(np.mean(ens.terminal() > 0.5))
    print(f"{method:10s} TV={tv_distance(dens, exact, x):.3f}  right-mode fraction={right:.3f}")
