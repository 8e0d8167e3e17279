from hypothesis import HealthCheck, settings

# first call into the compiled kernel can blow any per-example deadline
settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")
