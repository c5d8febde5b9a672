"""Product lifecycle analytics from review streams."""


def version():
    """Return the installed package version."""
    import importlib.metadata
    return importlib.metadata.distribution("product-lifecycle").version
