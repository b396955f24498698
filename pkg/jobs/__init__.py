# Batch job execution for the hypobv CLI