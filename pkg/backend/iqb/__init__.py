# Internet Quality Barometer
# Scoring engine: datasets -> network requirements -> use cases -> IQB score

__version__ = "0.1.0"
