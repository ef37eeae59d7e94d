from .errors import CutfinderError
from .harness import GeneratorConfig, aggregate, detect, generate, ingest, verify
from .netsim import DelayModel, RunReport, run
from .signals import SkewBound, TickScale

__version__ = '0.1.0'
