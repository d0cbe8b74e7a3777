# Unit tests for streamqoe
