"""Wavelet and orthogonal-polynomial projection DPPs for dataset subsampling:
continuous kernels, a continuous-to-discrete conversion pipeline, exact
samplers, quadrature and coreset estimators, and a brute-force validation
oracle."""

from .continuous import (ContinuousSample, sample_continuous, sample_projection_chain,
                         sample_stratified_haar)
from .datasets import Dataset, gen_gmm_trimodal, load_mnist_idx, pca_project
from .density import KernelDensityEstimate, kde_eval, relative_error_diagnostic, scott_bandwidth
from .discretize import (DiscreteProjectionDPP, TransferBoundInputs, build_discrete_dpp,
                         build_feature_matrix, error_functional, inclusion_probability,
                         sample_discrete)
from .estimators import (TestFunction, continuous_variance_exact, coreset_estimate,
                         discrete_variance_exact, integral_oracle, linear_statistic,
                         quadrature_adjusted, quadrature_basic, support_centers,
                         make_test_function)
from .kernels import (OPEKernel, ProjectionKernel, WaveletIndexSet, WaveletKernel,
                      kernel_eval, ope_kernel, wavelet_index_set, wavelet_kernel)
from .oracle import empirical_subset_frequencies, enumerate_subset_probabilities, tv_distance
from .wavelets import (ScalingFunction, TensorWavelet, daubechies2_cascade, eval_scaling,
                       eval_tensor, haar, haar_eval)

__version__ = "0.1.0"
