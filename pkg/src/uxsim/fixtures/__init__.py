"""Self-contained fixture servers: a demo shop and a WebDriver endpoint.

Everything here exists so the full stack can run and be tested on one
machine with zero external services.
"""
