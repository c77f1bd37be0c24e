#!/usr/bin/env python3
"""Walk the channel-to-feedback compression chain on a small MIMO link.

Builds a noiseless 2x4 channel, runs the four codec stages one at a time,
verifies the angle vector reconstructs the rotated steering matrix exactly,
then quantizes and bit-packs the angles.  Finishes with the 2x2 closed form
checked against the full pipeline.
"""

import numpy as np

from bfisense import (PathScenario, PositionParams, closed_form_2x2, csi_to_bfi,
                      dequantize, givens_decompose, givens_reconstruct,
                      half_wavelength_geometry, quantize, resize, rotate_real_last_row,
                      rsvd_steering, scatter_cluster)

np.set_printoptions(precision=4, suppress=True)

scenario = PathScenario(geometry=half_wavelength_geometry(2, 4),
                        cluster=scatter_cluster(seed=5, n_paths=4))
x = PositionParams((6.0, 1.5), ("x", "y"))
h = scenario.mean_csi(x)
print("channel matrix H (2 Rx x 4 Tx):")
print(h)

# Stage 1: steering matrix = right-singular matrix, columns by singular value
v = rsvd_steering(h)
print("\nsteering matrix V (4x4), columns ordered by singular value:")
print(v)

# Stage 2: keep as many columns as receive antennas
v_hat = resize(v, n_rx=2)
print(f"\nresized to {v_hat.shape[0]}x{v_hat.shape[1]} (truncated to N=2 columns)")

# Stage 3: rotate each column so the last row is real nonnegative
v_tilde = rotate_real_last_row(v_hat)
print("last row after rotation:", v_tilde[-1])

# Stage 4: Givens angles
theta = givens_decompose(v_tilde)
print(f"\n{len(theta.values)} feedback angles (phi in [0,2pi), psi in [0,pi/2]):")
for label, value in theta.elements:
    print(f"  {label.kind}_{label.row}{label.col} = {value:.6f}")

round_trip = np.linalg.norm(givens_reconstruct(theta) - v_tilde)
print(f"\nlossless reconstruction check: |reconstruct(angles) - V~| = {round_trip:.2e}")

one_shot = csi_to_bfi(h)
print("one-shot transform matches the staged chain:",
      np.allclose(one_shot.values, theta.values))

# Quantization at psi width 7 (phi width 9), then the packed wire format
q = quantize(theta, b_psi=7)
back = dequantize(q)
print(f"\nquantized codes ({q.b_phi}-bit phi / {q.b_psi}-bit psi):", q.codes.tolist())
print("max quantization error:", float(np.max(np.abs(back.values - theta.values))),
      "<= half step", np.pi / 2 ** (q.b_psi + 2))
print("packed bytes:", q.packed.hex())

# Closed form for the 2x2 special case
rng = np.random.default_rng(1)
h22 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
phi, psi = closed_form_2x2(h22)
pipeline = csi_to_bfi(h22)
print("\n2x2 closed form  (phi, psi):", (round(phi, 9), round(psi, 9)))
print("2x2 full pipeline (phi, psi):", tuple(np.round(pipeline.values, 9)))
