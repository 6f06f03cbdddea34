from notepool.cli import entrypoint

entrypoint()
