# Namespace package support mirrors the rest of the distribution layout
__path__ = __import__("pkgutil").extend_path(__path__, __name__)
