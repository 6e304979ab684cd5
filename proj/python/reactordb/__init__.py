"""reactordb: an in-memory actor-relational database engine with the
SmartMart benchmark, driven from python through the native core."""

from reactordb._core import Engine, ZipfSampler, predict_trend, run_workload

__all__ = ["Engine", "ZipfSampler", "predict_trend", "run_workload"]
