from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

def sample():
    qc = QuantumCircuit(2, 2)
    qc.x(1)
    qc.measure(0, 0)  # expect: const-clas-bit
    qc.measure(1, 1)
    return qc
