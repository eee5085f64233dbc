"""Target transforms, training schedules and irradiance estimators."""
