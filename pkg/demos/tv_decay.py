"""Two ensembles from different starts forget their initial condition.

The binned TV distance between the laws of theta_t is reported next to the
noise floor, the same statistic for two independent ensembles with the same
start.
"""
from sgld_stream import AR1Stream, NoiseModel, linear_model, two_start_decay

rep = two_start_decay(linear_model(), AR1Stream(0.9), NoiseModel.gaussian(1), lam=0.1,
                      theta0_A=[0.0], theta0_B=[10.0],
                      checkpoints=(0, 10, 25, 50, 100, 200, 1000), n_chains=10_000, seed=3)
print(f"{'t':>5} {'TV':>7} {'floor':>7}")
for p in rep.points:
    print(f"{p.t:5d} {p.tv.value:7.4f} {p.floor.value:7.4f}")
