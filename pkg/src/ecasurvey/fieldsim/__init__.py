from .drive import (
    DriveConfig,
    DriveLog,
    RobotState,
    SimulationError,
    arc_step,
    dead_reckon,
    integrate_open_loop,
    simulate_drive,
)
from .ekf import EkfNoise, EkfTrace, FilterDivergenceError, PoseEstimate, ekf_fuse
from .field import FieldTruth, GenerationError, field_summary, generate_field
from .planning import plan_serpentine
from .survey import (
    SITE_DATUM,
    SimScenario,
    TruthConfig,
    VirtualSurvey,
    run_virtual_survey,
    sense_eca,
    twin_surveys,
)
