"""Client/server protocol: wire codec, transports, server hub and client."""
