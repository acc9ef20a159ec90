"""Edge-based adaptive formation control with prescribed-performance funnels."""

from .controller import ControllerGains, GainDiagnostics, gain_diagnostics
from .engine import (ClosedLoop, InitialConstraintViolation, Metrics, TrajectoryLog,
                     check_initial, rk4_step, run_scenario)
from .funnel import (ConstraintMode, FunctionFamily, FunnelArray, FunnelViolation,
                     MappedError, MappingJacobians, PerformanceSpec,
                     UnifiedPerformanceFunction, bounds_at, classify_mode,
                     map_error, map_jacobians)
from .graphs import (IncidenceSet, LaplacianSet, Topology, TopologyClass,
                     TreePartition, build_incidence, build_laplacians,
                     classify_topology, lemma1_certificate, tree_partition)
from .plant import (FormationTarget, FrictionModel, edge_errors, friction_regressor,
                    pentagon_targets, plant_rate)
from .scenario import ScenarioConfig, ScenarioError, load_scenario, parse_scenario

__version__ = "0.1.0"
