def pytest_configure(config):
    config.addinivalue_line("markers", "slow: longer verification sweeps")
