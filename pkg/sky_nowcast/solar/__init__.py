"""Solar geometry and clear-sky modelling."""
