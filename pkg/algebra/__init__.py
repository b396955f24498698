# Exact polynomial algebra and symbolic test functions