"""Matrix product state variational toolkit and BQP-to-MPS reduction compiler."""
