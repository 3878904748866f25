# Test package for streambp
