from .OrbitPoint import OrbitPoint, Word
from .ExponentEstimate import ExponentEstimate
from .ClosedGeodesic import ClosedGeodesic
from .ExcursionRecord import ExcursionRecord
from .SprReport import SprReport, Verdict
from .GeodesicPath import GeodesicPath
from .StretchSample import StretchSample
from .MorseImage import MorseImage
from .CurrentAverage import CurrentAverage
from .CurvatureCertificate import CurvatureCertificate
from .DerivativeExperiment import DerivativeExperiment, DerivativeRung

__all__ = ["OrbitPoint", "Word", "ExponentEstimate", "ClosedGeodesic",
           "ExcursionRecord", "SprReport", "Verdict", "GeodesicPath",
           "StretchSample", "MorseImage", "CurrentAverage",
           "CurvatureCertificate", "DerivativeExperiment", "DerivativeRung"]
