# Cauchy operators and almost-zero extensions