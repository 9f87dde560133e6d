"""binfleet: a desk-scale smart waste collection platform.

Simulates sensor-equipped bins reporting fill levels over a lossy uplink,
runs a monitoring center that raises alerts and dispatches collection
trucks over planned routes, and serves operator and public HTTP APIs.
"""

__version__ = "0.1.0"
