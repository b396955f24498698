# Shared configuration, models, errors and logging for hypobv