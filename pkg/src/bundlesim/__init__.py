"""Energy-aware flow-to-port assignment over EEE link bundles."""

from .energy import (EnergyParams, bundle_lower_bound, expected_toff,
                     measured_consumption, sigma, waterfill)
from .estimation import FlowCounters
from .flowkey import (FlowKey, FlowKeyRegistry, MaskSpec, flow_distribution,
                      flow_key, histogram_variance)
from .harness import (ExperimentConfig, ExperimentReport, emit_csv,
                      run_experiment, sweep)
from .linksim import BundleSim, EeeTimings, LinkState
from .scheduling import (Assignment, BundleConfig, assign_bounded_greedy,
                         assign_conservative, assign_equitable, assign_greedy,
                         assign_random)
from .traffic import (Packet, PacketArrays, SyntheticProfile, TraceError,
                      generate_synthetic, generate_synthetic_arrays,
                      read_trace, scale_trace, write_trace)

__version__ = "0.1.0"
