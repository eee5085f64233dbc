"""Sky-image processing: ROI masking, cropping, sun masks and the raw tensor container."""
