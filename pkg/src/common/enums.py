from enum import Enum

class Frame(str, Enum):
    WORLD = "G"
    IMU = "I"
    RADAR = "R"
    CLONE = "I_n"
    LANDMARK = "L_m"

class Backend(str, Enum):
    EKF = "ekf"
    FG = "fg"

class CalibrationMode(str, Enum):
    ONLINE = "online"
    FIXED = "fixed"

class MeasurementClass(str, Enum):
    DISTANCE = "distance"
    DOPPLER = "doppler"
    LANDMARK = "landmark"

class TrajectoryFamily(str, Enum):
    HOVER = "hover"
    CIRCLE = "circle"
    LISSAJOUS = "lissajous"
    ROUNDED_RECTANGLE = "rounded_rectangle"
    HOVER_THEN_LOOP = "hover_then_loop"

class YawProfile(str, Enum):
    FIXED = "fixed"
    RATE = "rate"
    SINUSOID = "sinusoid"

class WindowKind(str, Enum):
    RECTANGULAR = "rectangular"
    HAMMING = "hamming"
    HANN = "hann"

class CfarGeometry(str, Enum):
    CROSS = "cross"
    RANGE = "range"

class EventKind(str, Enum):
    IMU = "imu"
    RADAR = "radar"
