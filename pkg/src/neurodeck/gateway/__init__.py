"""Self-hosted care gateway: auth, patients, artifact storage, analyzers."""

from neurodeck.gateway.app import GatewayConfig, create_app, load_config

__all__ = ["GatewayConfig", "create_app", "load_config"]
