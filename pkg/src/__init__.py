# Marker for Python package

