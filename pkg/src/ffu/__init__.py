"""Fitness-for-use noise covariance optimization for private linear queries."""
