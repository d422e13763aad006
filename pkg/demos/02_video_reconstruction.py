"""
Recovering eight frames from one snapshot
=========================================

DeSCI alternates a projection onto the set of cubes consistent with the
snapshot and a low-rank denoising step on groups of similar patches.  Here
it is compared with the same projection loop driven by a total-variation
denoiser.  Frames of both reconstructions are written as PNG files.
"""
import time
from pathlib import Path

from desci import (SensingOperator, SolverConfig, TvConfig, desci_run, forward,
                   gaptv_run, gen_shifting_binary_mask)
from desci.data import save_frames
from desci.scenes import moving_square

out = Path(__file__).with_name("output")

truth = moving_square(32, 32, 8)
op = SensingOperator(gen_shifting_binary_mask(32, 32, 8, density=0.5, seed=0))
y = forward(op, truth)

# %%
# Total variation baseline.
t0 = time.time()
tv, tv_reports = gaptv_run(op, y, TvConfig(), truth=truth)
print(f"GAP-TV  {tv_reports[-1].psnr:6.2f} dB  ({time.time() - t0:.0f} s)")

# %%
# DeSCI with the default noise schedule 100, 50, 25, 12.5 and 60 iterations
# per level.  Progress is printed at the end of every level.


def progress(rep, _x):
    if rep.iteration % 60 == 0 and rep.iteration:
        print(f"  iteration {rep.iteration:3d}  sigma {rep.sigma_n:5.1f}  PSNR {rep.psnr:.2f} dB")


t0 = time.time()
rec, reports = desci_run(op, y, SolverConfig(), truth=truth, callback=progress)
print(f"DeSCI   {reports[-1].psnr:6.2f} dB  ({time.time() - t0:.0f} s)")

# %%
save_frames(truth, out, "truth")
save_frames(tv, out, "gaptv")
save_frames(rec, out, "desci")
print("frames written to", out)
