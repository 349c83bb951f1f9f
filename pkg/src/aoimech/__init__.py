"""Optimal mechanisms for procuring fresh data."""
__version__ = "0.1.0"

from .aoi_cost import AoiCostModel, PowerCost, TabulatedCost
from .baselines import BenchmarkMechanism, CompleteInformationPricing, benchmark_mechanism, complete_info_pricing
from .cost_dist import CostDistribution, IronedVirtualCost, Tabulated, TruncExp, Uniform, iron
from .errors import AoiMechError, ConfigError, DomainError, InfeasibleError, NumericalError, ResourceError
from .kernels import BACKEND
from .mech_multi import MultiAllocation, MultiSourceMechanism, Source, SourceProfile, aggregate_rate, allocate
from .mech_quantized import QuantizedMultiMechanism, QuantizedSingleMechanism, Quantizer, build_quantized, loss_bound
from .mech_single import NaiveMechanism, PriceQuote, SingleSourceMechanism

__all__ = [
    "AoiCostModel", "PowerCost", "TabulatedCost",
    "CostDistribution", "Uniform", "TruncExp", "Tabulated", "IronedVirtualCost", "iron",
    "SingleSourceMechanism", "NaiveMechanism", "PriceQuote",
    "Source", "SourceProfile", "MultiSourceMechanism", "MultiAllocation", "aggregate_rate", "allocate",
    "Quantizer", "QuantizedSingleMechanism", "QuantizedMultiMechanism", "build_quantized", "loss_bound",
    "BenchmarkMechanism", "CompleteInformationPricing", "benchmark_mechanism", "complete_info_pricing",
    "AoiMechError", "ConfigError", "DomainError", "InfeasibleError", "NumericalError", "ResourceError",
    "BACKEND",
]
