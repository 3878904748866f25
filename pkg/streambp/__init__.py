# streambp package
