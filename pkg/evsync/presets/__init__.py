"""Bundled run configurations, loaded with evsync.config.load_preset."""
