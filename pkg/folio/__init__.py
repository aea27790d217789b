"""Online portfolio selection with sampled, approximate and query-model emulated updates."""
