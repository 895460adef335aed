"""ProtocolRunner mixins (refinement choice, teleportation, one-way computation)."""
