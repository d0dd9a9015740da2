"""jointgibbs: 결합 모형 기반 베이지안 결측 대체"""

__version__ = "0.1.0"
