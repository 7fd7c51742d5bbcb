# Marker for Python package
