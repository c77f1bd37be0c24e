"""bfisense: Wi-Fi sensing with compressed beamforming feedback.

A numpy/scipy toolkit that simulates MIMO channel state information,
compresses it into the beamforming feedback angle vector the way explicit
feedback does (steering matrix, column rotation, Givens angles,
quantization), quantifies how much positional information each feedback
element carries via a Gaussian-surrogate Cramer-Rao bound, selects the most
informative elements greedily, and evaluates the result with subspace
direction finding and neural-network positioning.
"""

__version__ = "0.1.0"

from .errors import (CombinatorialBudgetError, DegenerateInputError,
                     DegeneratePositionError, InvalidInputError)
from .linalg import random_unitary, svd, unitarity_defect
from .channel import (ArrayGeometry, NoiseSpec, Path, PathScenario, Scatterer,
                      SubcarrierGrid, SPEED_OF_LIGHT, csi_mean, csi_record, csi_sample,
                      csi_sample_batch, derive_seed, dump_csi_records, fold_visible,
                      half_wavelength_geometry, load_csi_records, los_path,
                      noise_var_for_snr, parse_csi_record, scatter_cluster,
                      static_path_cluster)
from .bfi import (Bfi, BfiLabel, QuantizedBfi, bfi_element_count, bfi_element_labels,
                  bfi_from_json, bfi_to_json, closed_form_2x2, csi_to_bfi, csi_to_bfi_batch,
                  dequantize, dump_bfi, givens_decompose, givens_reconstruct,
                  givens_reconstruct_batch, load_bfi, pack_quantized, quantize,
                  resize, rotate_real_last_row, rsvd_steering, unpack_quantized)
from .crb import (CrbConfig, GaussianModel, PositionParams, bfi_jacobian, crb_map,
                  crb_map_rows, element_scores, estimate_moments, fisher_crb, nl_crb,
                  periodic_diff, position_analysis, scores_from_model, wrap_angle_diffs)
from .selection import (RoiGrid, SelectionResult, annulus_roi, best_element_map,
                        brute_force_select, coverage_counts, dump_selection, greedy_select,
                        load_selection, parameter_roi, select_features, selection_from_json,
                        selection_to_json)
from .mlp import MlpSpec
from .evaluation import (Dataset, PositioningResult, gen_dataset, ks_gaussian_pvalue,
                         mc_estimator_variance, music_estimate_aod, music_spectrum,
                         split_dataset, train_eval_positioner, write_dataset_csv,
                         write_errors_csv)

__all__ = [name for name in dir() if not name.startswith("_")]
