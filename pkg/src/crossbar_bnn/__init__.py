"""Ternary 13-6-3 network on a simulated 15x15 passive MTJ crossbar."""
from .crossbar import (ConductanceMap, Crossbar, VerifyConfig, WriteReport, build_crossbar, clear_array,
                       program_solution, read_all, read_device, solve_network, write_pulse, write_verify)
from .device import OFF, ON, DeviceParams, MtjDevice, State
from .inference import hw_forward, rms_deviation, solution_accuracy, superposition_check
from .mapping import TargetStateMap, extract_weights, map_weights
from .study import estimate_gnorm, quartile_stats, run_sweep, variation_study
from .ternary import TernarySolution
from .trainer import TrainConfig, generate_solutions, train_one

__version__ = "0.1.0"
