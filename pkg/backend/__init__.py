"""
Backend package for the Internet Quality Barometer.
Holds the scoring engine (backend.iqb) and its command-line entrypoint.
"""
