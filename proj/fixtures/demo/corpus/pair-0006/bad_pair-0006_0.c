404: Not Found