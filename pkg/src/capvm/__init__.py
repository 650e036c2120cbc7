"""capvm: virtual constrained devices hosting sandboxed Wasm capsules.

Subpackages/modules:
  wasm     - binary parser, validator, fuel-metered interpreter
  hostapi  - deterministic host bindings (rng, timer, log, sensors)
  capsule  - capsule lifecycle, budgets, and the request ABI
  coap     - RFC-7252-subset message codec
  secure   - authenticated envelope, replay window, gatekeeper stamps
  device   - the virtual device server and transports
  client   - operator-side request helpers used by the CLI
  bench    - measurement harness with geometric statistics
  corpus   - example capsules used by tests, demos, and benches
"""

__version__ = "0.1.0"
