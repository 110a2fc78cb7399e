# scenfuzz/settings.py
"""
scenfuzz Settings

These settings can be overridden in your Django project's settings.py by defining SCENFUZZ_CONFIG
"""

# Default scenfuzz configuration
DEFAULT_SCENFUZZ_CONFIG = {
    "PROJECT_NAME": "scenfuzz",
    # Sampler settings
    "SAMPLER": {
        "KIND": "halton",  # random, halton, mab
        "MAB_BINS": 5,
        "MAB_EXPLORATION": 1.0,
        "BATCH_SIZE": 1,
    },
    # Campaign budget; at least one bound must be set
    "BUDGET": {
        "MAX_SAMPLES": None,
        "MAX_SECONDS": 1800,
    },
    # Simulator settings
    "SIMULATION": {
        "DT": 0.1,
        "HORIZON": 30.0,
        "V_MAX": 30.0,
        "ACCEL_MIN": -8.0,
        "ACCEL_MAX": 4.0,
        "MAX_YAW_RATE": 1.2,
        "PEDESTRIAN_V_MAX": 3.0,
        "SPAWN_CLEARANCE": 1.0,
        "SUT_DEADLINE": 1.0,
    },
    # Baseline autopilot used by --sut builtin
    "AUTOPILOT": {
        "CRUISE_SPEED": 10.0,
        "K_SPEED": 1.0,
        "K_REL_SPEED": 0.8,
        "K_GAP": 0.3,
        "TIME_GAP": 1.2,
        "STANDSTILL_GAP": 7.0,
        "STOP_LINE_GAP": 1.0,
        "LOOKAHEAD_MIN": 4.0,
        "LOOKAHEAD_GAIN": 0.3,
        "YIELD_TO_PEDESTRIANS": False,
        "STOP_AT_STOP_LINES": True,
    },
    # Safety metric thresholds
    "MONITORS": {
        "DISTANCE": 5.0,
        "TTC": 2.0,
        "PROGRESS": 11.0,
        "LANE": 0.5,
        "CAP": 100.0,
        "INCLUDE_PEDESTRIANS": False,
    },
    # epsilon-coverage estimator
    "COVERAGE": {
        "TOLERANCE": 0.05,
        "MESH_BUDGET": 10_000_000,
    },
    # Error table storage
    "STORAGE": {
        "KEEP_ALL_TRACES": False,
    },
    # Logging settings
    "LOGGING": {
        "LEVEL": "INFO",
        "FORMAT": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        "FILE_PATH": None,
        "CONSOLE_OUTPUT": True,
    },
    # Monitoring settings
    "MONITORING": {
        "ENABLE_PROFILING": True,
    },
    # Rollout workers; SCENFUZZ_WORKERS overrides
    "WORKERS": 1,
    # Extra directories holding a scenarios manifest.json
    "SCENARIO_DIRECTORIES": [],
}

