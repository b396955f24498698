# Weight sequences and operator indices