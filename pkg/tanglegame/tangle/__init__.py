"""The tangle DAG: vertices, views, weights and cones."""
