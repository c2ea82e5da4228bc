# Algorithms package
