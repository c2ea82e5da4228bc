# Shared-resource aware orchestration package
