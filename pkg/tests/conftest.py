from hypothesis import HealthCheck, settings

# property tests run numeric kernels whose cost varies between draws
settings.register_profile("afc", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("afc")
