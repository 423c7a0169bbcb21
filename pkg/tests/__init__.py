# Test package marker for pytest discovery.
